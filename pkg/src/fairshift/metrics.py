"""Evaluation across the shift family.

Models are passed as score functions: any callable mapping an (n, d) feature
matrix to scores in (0, 1). ``as_scorer`` adapts a Predictor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .domain import CELLS, Dataset
from .predictor import Predictor, forward
from .rng import derive_rng
from .synthgen import subsample_to_spec

CLIP = 1e-12


class MissingCell(ValueError):
    pass


def as_scorer(model) -> Callable:
    if isinstance(model, Predictor):
        return lambda x: forward(model, x)
    return model


def scores_of(model, data: Dataset) -> np.ndarray:
    return np.asarray(as_scorer(model)(data.x), dtype=float).reshape(len(data))


def logistic_loss(scores, labels) -> np.ndarray:
    p = np.clip(scores, CLIP, 1 - CLIP)
    return -(labels * np.log(p) + (1 - labels) * np.log1p(-p))


def risk(model, data: Dataset) -> float:
    if len(data) == 0:
        raise ValueError("empty data")
    return float(np.mean(logistic_loss(scores_of(model, data), data.y)))


def subgroup_risks(model, data: Dataset, check_identity: bool = True) -> dict:
    """Mean loss in each present (y, v) cell; absent cells are omitted."""
    losses = logistic_loss(scores_of(model, data), data.y)
    out = {}
    for c in CELLS:
        m = data.cell_mask(*c)
        if m.any():
            out[c] = float(losses[m].mean())
    if check_identity:
        recomposed = recompose_risk(out, data)
        if abs(recomposed - losses.mean()) > 1e-12:
            raise AssertionError(f"risk decomposition off by {recomposed - losses.mean():.3e}")
    return out


def recompose_risk(sub: dict, data: Dataset) -> float:
    """sum_y P(y) [P(v=0|y) R_0y + P(v=1|y) R_1y] with empirical frequencies."""
    n = len(data)
    total = 0.0
    for y in (0, 1):
        ny = int((data.y == y).sum())
        if ny == 0:
            continue
        inner = 0.0
        for v in (0, 1):
            nyv = int(data.cell_mask(y, v).sum())
            if nyv:
                inner += nyv / ny * sub[(y, v)]
        total += ny / n * inner
    return total


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC with midranks (ties count one half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n1 = int((labels == 1).sum())
    n0 = int((labels == 0).sum())
    if n1 == 0 or n0 == 0:
        raise ValueError("AUROC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[labels == 1].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def model_auroc(model, data: Dataset) -> float:
    return auroc(scores_of(model, data), data.y)


def _group_mean(s, mask, what):
    if not mask.any():
        raise MissingCell(f"no examples with {what}")
    return float(s[mask].mean())


def eo_gaps(model, data: Dataset) -> dict:
    s = scores_of(model, data)
    return {
        y: _group_mean(s, data.cell_mask(y, 1), f"y={y}, v=1") - _group_mean(s, data.cell_mask(y, 0), f"y={y}, v=0")
        for y in (0, 1)
    }


def eo_violation(model, data: Dataset) -> float:
    return max(abs(g) for g in eo_gaps(model, data).values())


def dp_gap(model, data: Dataset) -> float:
    s = scores_of(model, data)
    return _group_mean(s, data.v == 1, "v=1") - _group_mean(s, data.v == 0, "v=0")


def dp_violation(model, data: Dataset) -> float:
    return abs(dp_gap(model, data))


def family_test_sets(pool: Dataset, family, n_per: int, seed: int) -> dict:
    return {
        spec.mu: subsample_to_spec(pool, spec, n_per, derive_rng(seed, "testset", spec.mu))
        for spec in family
    }


def robustness_range(model, pool: Dataset, family, n_per: int, seed: int):
    """(max risk - min risk over the family, {mu: risk})."""
    sets = family_test_sets(pool, family, n_per, seed)
    per = {mu: risk(model, d) for mu, d in sets.items()}
    return max(per.values()) - min(per.values()), per


def _resample(draw, n: int, B: int, seed) -> dict:
    if B < 1:
        raise ValueError("B must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    vals, failed = [], 0
    for _ in range(B):
        try:
            vals.append(float(draw(rng.integers(0, n, size=n))))
        except ValueError:
            failed += 1
    if not vals:
        raise ValueError("every bootstrap replicate failed")
    vals = np.array(vals)
    return {"mean": float(vals.mean()), "std": float(vals.std()), "n": len(vals), "failed": failed}


def bootstrap(metric_fn: Callable, data: Dataset, B: int, seed) -> dict:
    """Row-resampling bootstrap; resamples that violate a metric precondition are skipped."""
    return _resample(lambda idx: metric_fn(data.take(idx)), len(data), B, seed)


def bootstrap_scored(metric_fn: Callable, scores, y, v, B: int, seed) -> dict:
    """Bootstrap on precomputed scores: ``metric_fn(scores, y, v)``."""
    return _resample(lambda idx: metric_fn(scores[idx], y[idx], v[idx]), len(scores), B, seed)


def _eo_from_scores(s, y, v):
    gaps = []
    for yy in (0, 1):
        a, b = (y == yy) & (v == 1), (y == yy) & (v == 0)
        if not a.any() or not b.any():
            raise MissingCell(f"y={yy} slice lacks a group")
        gaps.append(abs(s[a].mean() - s[b].mean()))
    return max(gaps)


def _dp_from_scores(s, y, v):
    if not (v == 1).any() or not (v == 0).any():
        raise MissingCell("an attribute group is empty")
    return abs(s[v == 1].mean() - s[v == 0].mean())


@dataclass
class EvalReport:
    per_dist: dict  # mu -> {risk, auroc, n}
    robustness_range: float
    eo_violation: float
    dp_violation: float
    bootstrap: dict = field(default_factory=dict)
    subgroup_risks: dict = field(default_factory=dict)
    name: str = "model"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "per_dist": {repr(float(mu)): v for mu, v in sorted(self.per_dist.items())},
            "robustness_range": self.robustness_range,
            "eo_violation": self.eo_violation,
            "dp_violation": self.dp_violation,
            "bootstrap": self.bootstrap,
            "subgroup_risks": {f"y{y}_v{v}": r for (y, v), r in sorted(self.subgroup_risks.items())},
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    def plot_rows(self) -> list:
        rows = []
        for mu, d in sorted(self.per_dist.items()):
            b = self.bootstrap.get(f"auroc@{mu!r}", {})
            rows.append({
                "model": self.name, "mu": mu, "risk": d["risk"], "auroc": d["auroc"],
                "auroc_boot_mean": b.get("mean"), "auroc_boot_std": b.get("std"), "n": d["n"],
            })
        return rows


def evaluate(model, pool: Dataset, source: Dataset, family, n_per: int, seed: int,
             B: int = 1000, name: str = "model") -> EvalReport:
    """Full report: family risks/AUROCs, range, EO/DP on ``source``, bootstraps.

    ``source`` is a test set from the training distribution (EO/DP are measured
    there); ``pool`` feeds the shifted test sets.
    """
    sets = family_test_sets(pool, family, n_per, seed)
    per_dist, boot = {}, {}
    for mu, d in sets.items():
        s = scores_of(model, d)
        per_dist[mu] = {"risk": float(np.mean(logistic_loss(s, d.y))), "auroc": auroc(s, d.y), "n": len(d)}
        if B:
            boot[f"auroc@{mu!r}"] = bootstrap_scored(
                lambda ss, yy, vv: auroc(ss, yy), s, d.y, d.v, B, derive_rng(seed, "boot", "auroc", mu))
            boot[f"risk@{mu!r}"] = bootstrap_scored(
                lambda ss, yy, vv: float(np.mean(logistic_loss(ss, yy))), s, d.y, d.v, B,
                derive_rng(seed, "boot", "risk", mu))
    risks = [d["risk"] for d in per_dist.values()]
    s_src = scores_of(model, source)
    eo = _eo_from_scores(s_src, source.y, source.v)
    dp = _dp_from_scores(s_src, source.y, source.v)
    if B:
        boot["eo_violation"] = bootstrap_scored(_eo_from_scores, s_src, source.y, source.v, B,
                                                derive_rng(seed, "boot", "eo"))
        boot["dp_violation"] = bootstrap_scored(_dp_from_scores, s_src, source.y, source.v, B,
                                                derive_rng(seed, "boot", "dp"))
        boot["robustness_range"] = _bootstrap_range(sets, model, B, derive_rng(seed, "boot", "range"))
    sub = subgroup_risks(model, source)
    return EvalReport(per_dist, max(risks) - min(risks), eo, dp, boot, sub, name)


def _bootstrap_range(sets: dict, model, B: int, rng) -> dict:
    cached = {mu: (logistic_loss(scores_of(model, d), d.y)) for mu, d in sets.items()}
    vals = []
    for _ in range(B):
        rs = [ls[rng.integers(0, len(ls), size=len(ls))].mean() for ls in cached.values()]
        vals.append(max(rs) - min(rs))
    vals = np.array(vals)
    return {"mean": float(vals.mean()), "std": float(vals.std()), "n": B, "failed": 0}
