"""Grid search with a per-fold MMD t-test, then lowest validation loss among survivors."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .domain import Dataset
from .metrics import risk
from .predictor import Predictor, forward_repr
from .rng import derive_rng
from .synthgen import stratified_partition
from .train import TrainConfig, estimate_weights_from, fit, penalty_terms

SIGNIFICANCE = 0.05
ROUNDING_FLOOR = 1e-12


class NoPassingConfig(UserWarning):
    """Every grid point had significantly nonzero MMD; fell back to loss + penalty."""


class FoldTooSmall(UserWarning):
    pass


@dataclass
class GridPoint:
    cfg: TrainConfig
    val_loss: float
    fold_mmds: list
    mmd_mean: float
    mmd_std: float
    t_stat: float
    p_value: float
    passed: bool
    model: Optional[Predictor] = field(default=None, repr=False)
    selected: bool = False

    def row(self) -> dict:
        k = self.cfg.kernel.bandwidth_gamma
        return {
            "objective": self.cfg.objective, "alpha": self.cfg.alpha, "gamma": k, "l2": self.cfg.l2,
            "val_loss": self.val_loss, "mmd_mean": self.mmd_mean, "mmd_std": self.mmd_std,
            "t": self.t_stat, "p": self.p_value, "passed": int(self.passed), "selected": int(self.selected),
        }


def matched_mmd(model: Predictor, data: Dataset, cfg: TrainConfig, weights=None):
    """The objective's MMD statistic on ``data``; None when a required group is empty.

    ERM has no penalty of its own; its folds report the weighted marginal MMD
    for reference but never exclude it.
    """
    z = forward_repr(model, data.x)
    if cfg.objective == "erm":
        cfg = cfg.with_(objective="wm_mmd")
    if cfg.objective == "wm_mmd" and weights is None:
        weights = estimate_weights_from(data)
    val, _, skipped = penalty_terms(z, data.y, data.v, cfg, weights, need_grad=False)
    return None if skipped else val


def fold_mmd(model: Predictor, validation: Dataset, cfg: TrainConfig, k: int = 5,
             seed: int = 0, weights=None) -> list:
    """Per-fold MMD estimates on a (y, v)-stratified k-way split of ``validation``.

    Folds that cannot supply both attribute groups are reported as NaN.
    Estimates below ``ROUNDING_FLOOR`` are set to exactly zero: the kernel is
    bounded by 1, so smaller values are cancellation noise, and a
    scale-free t-test would otherwise read consistent-sign noise as signal.
    """
    folds = stratified_partition(validation, k, derive_rng(seed, "folds"))
    out = []
    for idx in folds:
        if len(idx) == 0:
            raise ValueError(f"validation set too small for {k} folds")
        val = matched_mmd(model, validation.take(idx), cfg, weights)
        if val is None:
            warnings.warn("fold lacks an attribute group; excluded from t-test", FoldTooSmall)
            val = float("nan")
        elif abs(val) < ROUNDING_FLOOR:
            val = 0.0
        out.append(val)
    return out


def t_test_zero(values) -> tuple:
    """Two-sided one-sample t-test of mean zero at level 0.05: (t, p, reject)."""
    vals = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if len(vals) < 2:
        raise ValueError("need at least 2 usable values")
    mean = vals.mean()
    sd = vals.std(ddof=1)
    if sd == 0:
        if mean == 0:
            return 0.0, 1.0, False
        return float(np.sign(mean) * np.inf), 0.0, True
    t = mean / (sd / np.sqrt(len(vals)))
    p = 2 * stats.t.sf(abs(t), df=len(vals) - 1)
    return float(t), float(p), bool(p < SIGNIFICANCE)


def evaluate_config(cfg: TrainConfig, train: Dataset, validation: Dataset, k: int = 5) -> GridPoint:
    model, _ = fit(train, cfg)
    weights = estimate_weights_from(train)
    if cfg.objective == "wm_mmd":
        val_loss = _weighted_risk(model, validation, weights)
    else:
        val_loss = risk(model, validation)
    folds = fold_mmd(model, validation, cfg, k, seed=cfg.seed, weights=weights)
    t, p, reject = t_test_zero(folds)
    if cfg.objective == "erm":
        reject = False  # ERM is chosen on validation loss alone
    usable = [f for f in folds if np.isfinite(f)]
    return GridPoint(cfg, val_loss, folds, float(np.mean(usable)), float(np.std(usable, ddof=1)),
                     t, p, not reject, model)


def _weighted_risk(model, data, weights) -> float:
    from .metrics import logistic_loss, scores_of

    u = weights(data.y, data.v)
    return float(u @ logistic_loss(scores_of(model, data), data.y) / u.sum())


def select(grid, train: Dataset, validation: Dataset, k: int = 5):
    """Return (best GridPoint, all GridPoints in grid order)."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    points = [evaluate_config(cfg, train, validation, k) for cfg in grid]
    order = range(len(points))
    passing = [i for i in order if points[i].passed]
    if passing:
        key = lambda i: (points[i].val_loss, points[i].cfg.alpha, i)
        best = min(passing, key=key)
    else:
        warnings.warn("no grid point passed the MMD test; using loss + alpha * MMD", NoPassingConfig)
        key = lambda i: (points[i].val_loss + points[i].cfg.alpha * points[i].mmd_mean, points[i].cfg.alpha, i)
        best = min(order, key=key)
    points[best].selected = True
    return points[best], points


SWEEP_COLUMNS = ("objective", "alpha", "gamma", "l2", "val_loss", "mmd_mean", "mmd_std", "t", "p",
                 "passed", "selected")


def write_sweep_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for gp in points:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in gp.row().items()})
