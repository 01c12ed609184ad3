"""Data and model assembly shared by the CLI, replication scripts and acceptance tests."""

from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from . import metrics as M
from .config import DEFAULTS, train_config
from .domain import Dataset, JointSpec, shift_family
from .kernelmmd import SliceSkipped, _quadform, group_coefficients, marginal_penalty
from .predictor import Predictor, forward_repr
from .rng import derive_rng
from .synthgen import SynthConfig, generate, oracle_fstar, split
from .train import OBJECTIVES, estimate_weights_from, fit


def synth_config(cfg: dict) -> SynthConfig:
    s = cfg["synth"]
    d = s["d_star"] + s["d_short"] + s["d_noise"]
    mix = ortho_group.rvs(d, random_state=derive_rng(cfg["seed"], "synth", "mix")) if s["mixed"] else None
    return SynthConfig(
        d_star=s["d_star"], d_short=s["d_short"], d_noise=s["d_noise"],
        delta_star=np.full(s["d_star"], s["shift_norm"] / np.sqrt(s["d_star"])),
        delta_short=np.full(s["d_short"], s["shift_norm"] / np.sqrt(s["d_short"])),
        sigma=s["sigma"], mix=mix, seed=cfg["seed"],
    )


@dataclass
class Bundle:
    synth: SynthConfig
    source: JointSpec
    train: Dataset
    test: Dataset
    pool: Dataset


def make_bundle(cfg: dict) -> Bundle:
    sc = synth_config(cfg)
    d = cfg["data"]
    src, neutral = JointSpec(**d["source"]), JointSpec(**d["pool"])
    seed = cfg["seed"]
    return Bundle(
        sc, src,
        generate(sc, src, d["n_train"], rng=derive_rng(seed, "data", "train")),
        generate(sc, src, d["n_test"], rng=derive_rng(seed, "data", "test")),
        generate(sc, neutral, d["n_pool"], rng=derive_rng(seed, "data", "pool")),
    )


def with_seed(cfg: dict, seed: int) -> dict:
    return {**cfg, "seed": int(seed)}


def default_config(**over) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    cfg.update(over)
    return cfg


def train_validation(cfg: dict, data: Dataset):
    """The fit/validation split every command and script uses."""
    return split(data, cfg["data"]["train_fraction"], derive_rng(cfg["seed"], "split"))


def oracle_scorer(b: Bundle):
    return lambda x: oracle_fstar(b.synth, b.source, x)


def train_objectives(cfg: dict, train: Dataset, objectives=OBJECTIVES) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SliceSkipped)
        return {obj: fit(train, train_config(cfg, obj))[0] for obj in objectives}


@dataclass
class SeedRun:
    cfg: dict
    bundle: Bundle
    fit_set: Dataset
    validation: Dataset
    models: dict


def run_seed(cfg: dict, objectives=OBJECTIVES) -> SeedRun:
    """Generate data for ``cfg['seed']`` and fit each objective on the fit split."""
    b = make_bundle(cfg)
    fit_set, val = train_validation(cfg, b.train)
    return SeedRun(cfg, b, fit_set, val, train_objectives(cfg, fit_set, objectives))


def slice_mmds(model: Predictor, data: Dataset, gamma: float, weights=None) -> dict:
    """Per-label-slice conditional MMD and the weighted marginal MMD of ``model``'s representation."""
    z = forward_repr(model, data.x)
    out = {}
    for y in (0, 1):
        m = data.y == y
        c = group_coefficients(data.v[m]) if m.any() else None
        out[("conditional_mmd", y)] = float("nan") if c is None else _quadform(z[m], c, gamma, False)[0]
    w = (weights or estimate_weights_from(data))(data.y, data.v)
    out[("weighted_marginal_mmd", "all")] = marginal_penalty(z, data.v, gamma, w, need_grad=False)[0]
    return out


def conditional_gap(model: Predictor, a: Dataset, b: Dataset, gamma: float) -> float:
    """Sum over label slices of |cond. MMD on a - cond. MMD on b|."""
    za, zb = forward_repr(model, a.x), forward_repr(model, b.x)
    ga = _per_slice(za, a, gamma)
    gb = _per_slice(zb, b, gamma)
    return float(np.abs(ga - gb).sum())


def _per_slice(z, d, gamma):
    return np.array([
        _quadform(z[d.y == y], group_coefficients(d.v[d.y == y]), gamma, False)[0] for y in (0, 1)
    ])


def family_metrics(model, pool: Dataset, family, n_per: int, seed: int) -> dict:
    sets = M.family_test_sets(pool, family, n_per, seed)
    out = {}
    for mu, d in sets.items():
        s = M.scores_of(model, d)
        out[mu] = {"risk": float(np.mean(M.logistic_loss(s, d.y))), "auroc": M.auroc(s, d.y),
                   "scores": s, "data": d}
    return out


def default_family(cfg: dict) -> list:
    return shift_family(cfg["data"]["source"]["p_y1"], cfg["evaluate"]["family"])


__all__ = [
    "Bundle", "make_bundle", "synth_config", "with_seed", "default_config", "train_validation", "oracle_scorer",
    "train_objectives", "SeedRun", "run_seed", "slice_mmds", "conditional_gap", "family_metrics", "default_family", "split",
]
