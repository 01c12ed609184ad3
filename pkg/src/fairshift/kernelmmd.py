"""RBF kernel, squared-MMD V-statistics and balancing weights.

All three estimators reduce to a quadratic form ``c^T K c`` over the pooled
sample, where ``c`` holds the (normalized) weights of group A and the negated
weights of group B. ``_quadform`` returns that value together with its
gradient in the sample locations, which training uses directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .domain import CellTable, Dataset, ZeroCell


class SliceSkipped(UserWarning):
    """A (y, v) slice was empty so its MMD term was dropped."""


@dataclass(frozen=True)
class KernelConfig:
    bandwidth_gamma: float = 100.0

    def __post_init__(self):
        if not self.bandwidth_gamma > 0:
            raise ValueError("bandwidth_gamma must be positive")


@dataclass(frozen=True, eq=False)
class BalancingWeights:
    table: np.ndarray  # u[y, v]

    def __call__(self, y, v):
        return self.table[np.asarray(y), np.asarray(v)]

    def __getitem__(self, cell) -> float:
        return float(self.table[cell])


def rbf_kernel(a, b, cfg: KernelConfig) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    d = a - b
    return float(np.exp(-(d @ d) / cfg.bandwidth_gamma))


def sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.sum(a**2, 1)[:, None] + np.sum(b**2, 1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def gram(a, b, gamma: float) -> np.ndarray:
    return np.exp(-sq_dists(np.atleast_2d(a), np.atleast_2d(b)) / gamma)


def _quadform(z: np.ndarray, c: np.ndarray, gamma: float, need_grad: bool = True):
    k = gram(z, z, gamma)
    kc = k @ c
    val = float(c @ kc)
    if not need_grad:
        return val, None
    # d/dz_i of sum_jl c_j c_l k_jl = -(4/gamma) c_i sum_j c_j k_ij (z_i - z_j)
    grad = -(4.0 / gamma) * c[:, None] * (kc[:, None] * z - k @ (c[:, None] * z))
    return val, grad


def _as_samples(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return s[:, None] if s.ndim == 1 else s


def mmd2_v(samples_a, samples_b, cfg: KernelConfig) -> float:
    a, b = _as_samples(samples_a), _as_samples(samples_b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample set")
    if a.shape[1] != b.shape[1]:
        raise ValueError("sample dimensions differ")
    z = np.vstack([a, b])
    c = np.concatenate([np.full(len(a), 1.0 / len(a)), np.full(len(b), -1.0 / len(b))])
    return _quadform(z, c, cfg.bandwidth_gamma, need_grad=False)[0]


def _normalized(w, n) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError("weights length does not match samples")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    tot = w.sum()
    if tot <= 0:
        raise ValueError("all-zero weights in a group")
    return w / tot


def mmd2_weighted(samples_a, weights_a, samples_b, weights_b, cfg: KernelConfig) -> float:
    """Self-normalized weighted V-statistic (weights normalized within each group)."""
    a, b = _as_samples(samples_a), _as_samples(samples_b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample set")
    z = np.vstack([a, b])
    c = np.concatenate([_normalized(weights_a, len(a)), -_normalized(weights_b, len(b))])
    return _quadform(z, c, cfg.bandwidth_gamma, need_grad=False)[0]


def group_coefficients(v: np.ndarray, weights=None):
    """Signed coefficients for a v=0 vs v=1 comparison, or None if a group is empty."""
    w = np.ones(len(v)) if weights is None else np.asarray(weights, dtype=float)
    c = np.zeros(len(v))
    for grp, sign in ((0, 1.0), (1, -1.0)):
        m = v == grp
        tot = w[m].sum()
        if not m.any() or tot <= 0:
            return None
        c[m] = sign * w[m] / tot
    return c


def marginal_penalty(z, v, gamma, weights=None, need_grad=True):
    """(value, grad, skipped) for the (weighted) marginal MMD between v-groups."""
    c = group_coefficients(v, weights)
    if c is None:
        return 0.0, np.zeros_like(z) if need_grad else None, 1
    val, g = _quadform(z, c, gamma, need_grad)
    return val, g, 0


def conditional_penalty(z, y, v, gamma, need_grad=True):
    """(value, grad, skipped) for sum over y of MMD between v-groups within Y=y."""
    total, skipped = 0.0, 0
    grad = np.zeros_like(z) if need_grad else None
    for yy in (0, 1):
        m = y == yy
        c = group_coefficients(v[m]) if m.any() else None
        if c is None:
            skipped += 1
            continue
        val, g = _quadform(z[m], c, gamma, need_grad)
        total += val
        if need_grad:
            grad[m] += g
    return total, grad, skipped


def mmd2_conditional(batch: Dataset, repr_of, cfg: KernelConfig) -> float:
    """Conditional MMD summed over label slices.

    ``repr_of`` maps the (n, d) feature matrix to (n, r) representations.
    Slices missing a v-group contribute 0 and raise a ``SliceSkipped`` warning.
    """
    z = _as_samples(repr_of(batch.x))
    val, _, skipped = conditional_penalty(z, batch.y, batch.v, cfg.bandwidth_gamma, need_grad=False)
    for _ in range(skipped):
        warnings.warn("label slice lacks one attribute group; term skipped", SliceSkipped)
    return val


def balancing_weights(table: CellTable) -> BalancingWeights:
    joint = table.joint
    for y in (0, 1):
        for v in (0, 1):
            if joint[y, v] <= 0:
                raise ZeroCell(y, v)
    u = np.outer(table.marginal_y, table.marginal_v) / joint
    return BalancingWeights(u)
