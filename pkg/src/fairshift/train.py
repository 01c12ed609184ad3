"""Minibatch SGD under ERM, marginal, conditional and weighted-marginal MMD objectives."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import expit

from . import kernelmmd as km
from .domain import Dataset
from .kernelmmd import BalancingWeights, KernelConfig
from .predictor import PARAM_NAMES, Predictor, backprop, bce_from_logits, normalized_weights
from .rng import derive_rng

OBJECTIVES = ("erm", "m_mmd", "c_mmd", "wm_mmd")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "erm"
    alpha: float = 0.0
    kernel: KernelConfig = field(default_factory=KernelConfig)
    l2: float = 0.0
    batch_size: int = 64
    epochs: int = 50
    learning_rate: Optional[float] = None  # None: 0.1 linear, 0.05 mlp
    seed: int = 0
    arch: str = "linear"
    repr_dim: int = 8
    hidden_width: Optional[int] = None  # alias for repr_dim when arch == "mlp"
    grad_clip: Optional[float] = 5.0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.alpha < 0 or self.l2 < 0:
            raise ValueError("alpha and l2 must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.objective != "erm" and self.batch_size < 2:
            raise ValueError("MMD objectives need batch_size >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if isinstance(self.kernel, dict):
            object.__setattr__(self, "kernel", KernelConfig(**self.kernel))

    @property
    def lr(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 0.1 if self.arch == "linear" else 0.05

    @property
    def width(self) -> int:
        return self.hidden_width if (self.arch == "mlp" and self.hidden_width) else self.repr_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if isinstance(d.get("kernel"), dict):
            d["kernel"] = KernelConfig(**d["kernel"])
        return cls(**d)

    def with_(self, **kw) -> "TrainConfig":
        return replace(self, **kw)


@dataclass
class ObjectiveTerms:
    value: float
    loss: float
    penalty: float
    l2_term: float
    skipped: int
    grad: dict


def penalty_terms(z, y, v, cfg: TrainConfig, weights: Optional[BalancingWeights], need_grad=True):
    """(value, grad wrt z, skipped) of the objective's MMD term, before alpha."""
    gamma = cfg.kernel.bandwidth_gamma
    if cfg.objective == "m_mmd":
        return km.marginal_penalty(z, v, gamma, need_grad=need_grad)
    if cfg.objective == "wm_mmd":
        if weights is None:
            raise ValueError("wm_mmd needs balancing weights")
        return km.marginal_penalty(z, v, gamma, weights=weights(y, v), need_grad=need_grad)
    if cfg.objective == "c_mmd":
        return km.conditional_penalty(z, y, v, gamma, need_grad=need_grad)
    return 0.0, (np.zeros_like(z) if need_grad else None), 0


def objective_terms(p: Predictor, batch: Dataset, cfg: TrainConfig,
                    weights: Optional[BalancingWeights] = None) -> ObjectiveTerms:
    if len(batch) == 0:
        raise ValueError("empty batch")
    x, y, v = batch.x, batch.y, batch.v
    pre = x @ p.params["W"].T + p.params["b"]
    z = pre if p.arch == "linear" else np.tanh(pre)
    s = z @ p.params["w"] + p.params["c"]

    ex_w = weights(y, v) if cfg.objective == "wm_mmd" else None
    a = normalized_weights(len(x), ex_w)
    loss = float(a @ bce_from_logits(s, y))
    ds = a * (expit(s) - y)

    if cfg.objective != "erm" and cfg.alpha > 0:
        pen, dz, skipped = penalty_terms(z, y, v, cfg, weights)
        dz = cfg.alpha * dz
    else:
        pen, skipped = 0.0, 0
        if cfg.objective != "erm":
            pen, _, skipped = penalty_terms(z, y, v, cfg, weights, need_grad=False)
        dz = np.zeros_like(z)

    grad = backprop(p, x, z, dz, ds)
    l2_term = 0.0
    if cfg.l2 > 0:
        l2_term = cfg.l2 * float(np.sum(p.params["W"] ** 2) + np.sum(p.params["w"] ** 2))
        grad["W"] = grad["W"] + 2 * cfg.l2 * p.params["W"]
        grad["w"] = grad["w"] + 2 * cfg.l2 * p.params["w"]
    value = loss + cfg.alpha * pen + l2_term
    return ObjectiveTerms(value, loss, pen, l2_term, skipped, grad)


def objective_value(p: Predictor, batch: Dataset, cfg: TrainConfig,
                    weights: Optional[BalancingWeights] = None):
    t = objective_terms(p, batch, cfg, weights)
    return t.value, t.grad


def estimate_weights_from(train: Dataset) -> BalancingWeights:
    return km.balancing_weights(train.empirical_table())


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    weights: Optional[list] = None

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.records])

    @property
    def skipped_total(self) -> int:
        return int(sum(r["skipped_slices"] for r in self.records))

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")

    def __eq__(self, other) -> bool:
        return isinstance(other, TrainLog) and self.records == other.records


def init_predictor(input_dim: int, cfg: TrainConfig) -> Predictor:
    return Predictor.init(input_dim, cfg.width, cfg.arch, rng=derive_rng(cfg.seed, "init"))


def fit(train: Dataset, cfg: TrainConfig, init: Optional[Predictor] = None):
    """Train from scratch (or from ``init``); returns (predictor, TrainLog)."""
    n = len(train)
    if n == 0:
        raise ValueError("empty training set")
    weights = estimate_weights_from(train) if cfg.objective == "wm_mmd" else None
    p = init_predictor(train.feature_dim, cfg) if init is None else init
    theta = p.flat()
    log = TrainLog(weights=None if weights is None else weights.table.tolist())
    n_batches = max(1, n // cfg.batch_size)
    order_rng = derive_rng(cfg.seed, "batches")
    for epoch in range(1, cfg.epochs + 1):
        perm = order_rng.permutation(n)
        sums = np.zeros(4)
        skipped = 0
        for idx in np.array_split(perm, n_batches):
            t = objective_terms(p, train.take(idx), cfg, weights)
            if not np.isfinite(t.value):
                raise TrainingDiverged(
                    f"non-finite objective at epoch {epoch} ({cfg.objective}, alpha={cfg.alpha})"
                )
            g = np.concatenate([t.grad[k].ravel() for k in PARAM_NAMES])
            gn = np.linalg.norm(g)
            if cfg.grad_clip is not None and gn > cfg.grad_clip:
                g = g * (cfg.grad_clip / gn)
            theta = theta - cfg.lr * g
            if not np.isfinite(theta).all():
                raise TrainingDiverged(f"non-finite parameters at epoch {epoch}")
            p = p.with_flat(theta)
            sums += (t.value, t.loss, t.penalty, t.l2_term)
            skipped += t.skipped
        m = sums / n_batches
        log.records.append({
            "epoch": epoch,
            "objective": float(m[0]),
            "loss": float(m[1]),
            "penalty": float(m[2]),
            "l2": float(m[3]),
            "skipped_slices": int(skipped),
        })
    return p, log
