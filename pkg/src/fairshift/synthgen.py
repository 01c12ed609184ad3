"""Synthetic anti-causal data.

Y shifts the mean of the sufficient block X*, V shifts the mean of a shortcut
block W, and a pure-noise block Z is appended. The observed features are an
orthogonal mix of (X*, W, Z), so neither block is coordinate aligned. Only
the (Y, V) joint changes across members of the shift family; P(X | X*, V)
and P(X* | Y) stay fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, logit
from scipy.stats import ortho_group

from .domain import CELLS, Dataset, JointSpec, cell_table
from .rng import derive_rng


class InsufficientCell(ValueError):
    def __init__(self, y: int, v: int, needed: int, have: int, mu: Optional[float] = None):
        self.y, self.v, self.needed, self.have, self.mu = y, v, needed, have, mu
        where = "" if mu is None else f" for mu={mu}"
        super().__init__(
            f"pool cannot supply cell (y={y}, v={v}){where}: need {needed}, have {have}"
        )


@dataclass(frozen=True, eq=False)
class SynthConfig:
    d_star: int = 4
    d_short: int = 4
    d_noise: int = 8
    delta_star: Optional[np.ndarray] = None
    delta_short: Optional[np.ndarray] = None
    sigma: float = 1.0
    mix: Optional[np.ndarray] = field(default=None, repr=False)
    seed: int = 0

    def __post_init__(self):
        if min(self.d_star, self.d_short, self.d_noise) < 1:
            raise ValueError("all block dimensions must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        for name, dim in (("delta_star", self.d_star), ("delta_short", self.d_short)):
            val = getattr(self, name)
            # default: norm-2 shift spread evenly over the block
            val = np.full(dim, 2.0 / np.sqrt(dim)) if val is None else np.asarray(val, dtype=float)
            if val.shape != (dim,):
                raise ValueError(f"{name} must have length {dim}")
            object.__setattr__(self, name, val)
        if self.mix is not None:
            m = np.asarray(self.mix, dtype=float)
            d = self.dim
            if m.shape != (d, d):
                raise ValueError(f"mix must be {d}x{d}")
            if np.abs(m.T @ m - np.eye(d)).max() > 1e-10:
                raise ValueError("mix is not orthogonal")
            object.__setattr__(self, "mix", m)

    @property
    def dim(self) -> int:
        return self.d_star + self.d_short + self.d_noise

    @classmethod
    def default(cls, seed: int = 0, mixed: bool = True) -> "SynthConfig":
        d = 16
        mix = ortho_group.rvs(d, random_state=derive_rng(seed, "synth", "mix")) if mixed else None
        return cls(mix=mix, seed=seed)

    def to_dict(self) -> dict:
        return {
            "d_star": self.d_star,
            "d_short": self.d_short,
            "d_noise": self.d_noise,
            "delta_star": self.delta_star.tolist(),
            "delta_short": self.delta_short.tolist(),
            "sigma": self.sigma,
            "mix": None if self.mix is None else self.mix.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        mix = d.pop("mix", None)
        return cls(mix=None if mix is None else np.array(mix), **d)


def _draw_cells(spec: JointSpec, n: int, rng: np.random.Generator):
    probs = cell_table(spec).joint.ravel()  # order (0,0), (0,1), (1,0), (1,1)
    k = rng.choice(4, size=n, p=probs)
    return k // 2, k % 2


def generate(cfg: SynthConfig, spec: JointSpec, n: int, strict: bool = True,
             rng: Optional[np.random.Generator] = None) -> Dataset:
    """Sample ``n`` examples from the anti-causal generator at ``spec``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if strict and not spec.has_overlap:
        raise ValueError(f"{spec} has a zero-probability (y, v) cell")
    if rng is None:
        rng = derive_rng(cfg.seed, "generate", spec.p_y1, spec.mu, n)
    y, v = _draw_cells(spec, n, rng)
    eps = rng.standard_normal((n, cfg.dim))
    xstar = y[:, None] * cfg.delta_star + cfg.sigma * eps[:, : cfg.d_star]
    w = v[:, None] * cfg.delta_short + cfg.sigma * eps[:, cfg.d_star : cfg.d_star + cfg.d_short]
    z = eps[:, cfg.d_star + cfg.d_short :]
    blocks = np.concatenate([xstar, w, z], axis=1)
    x = blocks if cfg.mix is None else blocks @ cfg.mix.T
    return Dataset(x, y, v, xstar)


def recover_xstar(cfg: SynthConfig, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != cfg.dim:
        raise ValueError(f"expected feature dimension {cfg.dim}, got {x.shape[1]}")
    blocks = x if cfg.mix is None else x @ cfg.mix
    return blocks[:, : cfg.d_star]


def oracle_fstar(cfg: SynthConfig, spec: JointSpec, x) -> np.ndarray:
    """E[Y | X*] under the generator; depends on ``x`` only through X*.

    Accepts one feature vector or a 2-D batch; returns a float for a single
    vector and an array otherwise.
    """
    single = np.ndim(x) == 1
    xs = recover_xstar(cfg, x)
    s2 = cfg.sigma**2
    a = cfg.delta_star / s2
    b = -cfg.delta_star @ cfg.delta_star / (2 * s2) + logit(spec.p_y1)
    p = expit(xs @ a + b)
    return float(p[0]) if single else p


def largest_remainder_counts(spec: JointSpec, n: int) -> dict:
    joint = cell_table(spec).joint
    exact = {c: n * joint[c] for c in CELLS}
    counts = {c: int(np.floor(q)) for c, q in exact.items()}
    short = n - sum(counts.values())
    # stable tie-break by CELLS order
    order = sorted(CELLS, key=lambda c: -(exact[c] - counts[c]))
    for c in order[:short]:
        counts[c] += 1
    return counts


def subsample_to_spec(pool: Dataset, spec: JointSpec, n: int, rng_seed) -> Dataset:
    """Exact per-cell counts drawn without replacement, then shuffled."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    counts = largest_remainder_counts(spec, n)
    picks = []
    for c in CELLS:
        idx = np.flatnonzero(pool.cell_mask(*c))
        need = counts[c]
        if need > len(idx):
            raise InsufficientCell(c[0], c[1], need, len(idx), mu=spec.mu)
        picks.append(rng.choice(idx, size=need, replace=False))
    idx = np.concatenate(picks)
    rng.shuffle(idx)
    return pool.take(idx)


def stratified_partition(data: Dataset, k: int, rng) -> list:
    """Split indices into k groups, dealing each (y, v) cell round-robin."""
    buckets = [[] for _ in range(k)]
    offset = 0
    for c in CELLS:
        idx = np.flatnonzero(data.cell_mask(*c))
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            buckets[(offset + j) % k].append(i)
        offset += len(idx)
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def split(data: Dataset, fraction: float, rng_seed) -> tuple:
    """Stratified split; the first part has exactly floor(fraction * n) rows."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    n = len(data)
    n_first = int(np.floor(fraction * n))
    if n_first == 0 or n_first == n:
        raise ValueError(f"split of {n} rows at {fraction} leaves an empty side")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    cells = [np.flatnonzero(data.cell_mask(*c)) for c in CELLS]
    quota = [fraction * len(ix) for ix in cells]
    take = [int(np.floor(q)) for q in quota]
    order = sorted(range(4), key=lambda i: -(quota[i] - take[i]))
    for i in order[: n_first - sum(take)]:
        take[i] += 1
    first, second = [], []
    for ix, t in zip(cells, take):
        ix = rng.permutation(ix)
        first.append(ix[:t])
        second.append(ix[t:])
    a, b = np.concatenate(first), np.concatenate(second)
    return data.take(rng.permutation(a)), data.take(rng.permutation(b))
