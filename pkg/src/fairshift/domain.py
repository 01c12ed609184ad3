"""Core value types: examples, datasets, joint (Y, V) specifications, cell tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

CELLS = ((1, 1), (1, 0), (0, 1), (0, 0))
DEFAULT_FAMILY = (0.1, 0.3, 0.5, 0.7, 0.9, 0.95)


class OverlapError(ValueError):
    """A (y, v) cell has zero probability where positivity is required."""


class ZeroCell(OverlapError):
    def __init__(self, y: int, v: int):
        self.y, self.v = y, v
        super().__init__(f"cell (y={y}, v={v}) has zero probability; balancing weights undefined")


@dataclass(frozen=True)
class Example:
    features: np.ndarray
    label: int
    attribute: int
    latent_xstar: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.label not in (0, 1) or self.attribute not in (0, 1):
            raise ValueError("label and attribute must be 0 or 1")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite feature")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columnar store of examples.

    ``x`` is (n, d), ``y`` and ``v`` are int arrays of length n, and ``xstar``
    is the optional (n, k) latent block kept for synthetic data.
    """

    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    xstar: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise ValueError("features must be a 2-D array")
        y = np.asarray(self.y).astype(np.int64)
        v = np.asarray(self.v).astype(np.int64)
        n = x.shape[0]
        if y.shape != (n,) or v.shape != (n,):
            raise ValueError("label/attribute length does not match features")
        if not (np.isin(y, (0, 1)).all() and np.isin(v, (0, 1)).all()):
            raise ValueError("labels and attributes must be binary")
        if not np.isfinite(x).all():
            raise ValueError("non-finite feature entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "v", v)
        if self.xstar is not None:
            xs = np.asarray(self.xstar, dtype=float)
            if xs.ndim != 2 or xs.shape[0] != n:
                raise ValueError("latent block shape mismatch")
            object.__setattr__(self, "xstar", xs)

    @property
    def feature_dim(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.x.shape[0]

    def __getitem__(self, i: int) -> Example:
        xs = None if self.xstar is None else self.xstar[i]
        return Example(self.x[i], int(self.y[i]), int(self.v[i]), xs)

    def __iter__(self) -> Iterator[Example]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_examples(cls, examples) -> "Dataset":
        examples = list(examples)
        if not examples:
            raise ValueError("no examples")
        xs = None
        if examples[0].latent_xstar is not None:
            xs = np.stack([e.latent_xstar for e in examples])
        return cls(
            np.stack([e.features for e in examples]),
            np.array([e.label for e in examples]),
            np.array([e.attribute for e in examples]),
            xs,
        )

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        xs = None if self.xstar is None else self.xstar[idx]
        return Dataset(self.x[idx], self.y[idx], self.v[idx], xs)

    def cell_mask(self, y: int, v: int) -> np.ndarray:
        return (self.y == y) & (self.v == v)

    def cell_counts(self) -> dict:
        return {c: int(self.cell_mask(*c).sum()) for c in CELLS}

    def empirical_table(self) -> "CellTable":
        if len(self) == 0:
            raise ValueError("empty dataset")
        joint = np.zeros((2, 2))
        for (y, v), c in self.cell_counts().items():
            joint[y, v] = c / len(self)
        return CellTable.from_joint(joint)

    def to_csv(self, path) -> None:
        d = self.feature_dim
        header = [f"x{j}" for j in range(d)] + ["y", "v"]
        if self.xstar is not None:
            header += [f"xs{j}" for j in range(self.xstar.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(len(self)):
                row = [repr(float(a)) for a in self.x[i]] + [int(self.y[i]), int(self.v[i])]
                if self.xstar is not None:
                    row += [repr(float(a)) for a in self.xstar[i]]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            raise ValueError(f"{path}: no data rows")
        header = rows[0]
        xcols = [i for i, h in enumerate(header) if h.startswith("x") and not h.startswith("xs")]
        scols = [i for i, h in enumerate(header) if h.startswith("xs")]
        try:
            iy, iv = header.index("y"), header.index("v")
        except ValueError:
            raise ValueError(f"{path}: header must contain y and v columns") from None
        body = np.array(rows[1:], dtype=float)
        xs = body[:, scols] if scols else None
        return cls(body[:, xcols], body[:, iy].astype(int), body[:, iv].astype(int), xs)


@dataclass(frozen=True)
class JointSpec:
    """Member of the shift family: P(Y=1) and mu = P(V=1|Y=1) = P(V=0|Y=0)."""

    p_y1: float
    mu: float

    def __post_init__(self):
        for name in ("p_y1", "mu"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name}={val} outside [0, 1]")

    @property
    def has_overlap(self) -> bool:
        return bool((cell_table(self).joint > 0).all())

    def idealized(self) -> "JointSpec":
        return JointSpec(self.p_y1, 0.5)


@dataclass(frozen=True, eq=False)
class CellTable:
    """Joint law of (Y, V) as a 2x2 array indexed ``joint[y, v]``."""

    joint: np.ndarray
    marginal_y: np.ndarray = field(init=False)
    marginal_v: np.ndarray = field(init=False)

    def __post_init__(self):
        joint = np.array(self.joint, dtype=float)
        if joint.shape != (2, 2) or (joint < 0).any():
            raise ValueError("joint must be a nonnegative 2x2 array")
        if abs(joint.sum() - 1.0) > 1e-12:
            raise ValueError(f"joint sums to {joint.sum()}, expected 1")
        joint.setflags(write=False)
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "marginal_y", joint.sum(axis=1))
        object.__setattr__(self, "marginal_v", joint.sum(axis=0))

    @classmethod
    def from_joint(cls, joint) -> "CellTable":
        return cls(np.asarray(joint, dtype=float))

    @classmethod
    def from_conditionals(cls, p_y1: float, p_v1_given_y0: float, p_v1_given_y1: float) -> "CellTable":
        """General P(V|Y) with two free conditionals."""
        py = np.array([1.0 - p_y1, p_y1])
        pv1 = np.array([p_v1_given_y0, p_v1_given_y1])
        joint = np.stack([py * (1.0 - pv1), py * pv1], axis=1)
        return cls(joint)

    def __getitem__(self, cell) -> float:
        y, v = cell
        return float(self.joint[y, v])


def cell_table(spec: JointSpec) -> CellTable:
    return CellTable.from_conditionals(spec.p_y1, 1.0 - spec.mu, spec.mu)


def shift_family(p_y1: float, mus=DEFAULT_FAMILY) -> list:
    return [JointSpec(p_y1, float(m)) for m in mus]
