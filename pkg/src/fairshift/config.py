"""Run configuration: nested YAML merged over defaults, with ``--set a.b=v`` overrides."""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .domain import DEFAULT_FAMILY, JointSpec
from .kernelmmd import KernelConfig
from .train import OBJECTIVES, TrainConfig


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": 0,
    "synth": {"d_star": 4, "d_short": 4, "d_noise": 8, "shift_norm": 2.0, "sigma": 1.0, "mixed": True},
    "data": {
        "source": {"p_y1": 0.3, "mu": 0.9},
        "pool": {"p_y1": 0.3, "mu": 0.5},
        "n_train": 4000,
        "n_test": 3000,
        "n_pool": 44000,
        "train_fraction": 0.75,
    },
    "train": {
        "objective": "erm",
        "alpha": 0.0,
        "gamma": 100.0,
        "l2": 0.0,
        "batch_size": 64,
        "epochs": 50,
        "learning_rate": None,
        "arch": "linear",
        "repr_dim": 8,
        "grad_clip": 5.0,
    },
    # per-objective overrides applied on top of `train` by experiment drivers
    "models": {
        "erm": {"alpha": 0.0},
        "m_mmd": {"alpha": 100.0, "gamma": 100.0},
        "c_mmd": {"alpha": 10.0, "gamma": 100.0},
        "wm_mmd": {"alpha": 10.0, "gamma": 100.0},
    },
    "sweep": {
        "objectives": ["erm", "m_mmd", "c_mmd", "wm_mmd"],
        "alpha": [1e3, 1e5, 1e7],
        "gamma": [10.0, 100.0, 1000.0],
        "l2": [0.0, 1e-4, 1e-3],
        "folds": 5,
    },
    "evaluate": {"family": list(DEFAULT_FAMILY), "n_per": 5000, "bootstrap": 1000},
}

# the smaller grid suited to desk-scale models
SYNTHETIC_ALPHA_GRID = [1.0, 10.0, 100.0, 1e3, 1e5, 1e7]


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown field '{where}'")
        if isinstance(base[k], dict) and base[k] and k != "models":
            if not isinstance(v, dict):
                raise ConfigError(f"field '{where}' must be a mapping")
            out[k] = _merge(base[k], v, where + ".")
        elif k == "models":
            if not isinstance(v, dict):
                raise ConfigError("field 'models' must be a mapping")
            for name, ov in v.items():
                if name not in OBJECTIVES:
                    raise ConfigError(f"unknown objective 'models.{name}'")
                out[k][name] = {**out[k].get(name, {}), **(ov or {})}
        else:
            out[k] = v
    return out


def parse_value(text: str):
    return yaml.safe_load(text)


def apply_overrides(cfg: dict, sets) -> dict:
    for item in sets or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        node = {}
        cur = node
        parts = key.strip().split(".")
        for p in parts[:-1]:
            cur[p] = {}
            cur = cur[p]
        cur[parts[-1]] = parse_value(raw)
        cfg = _merge(cfg, node)
    return cfg


def load(path=None, sets=None) -> dict:
    """Resolve a config file (or a run manifest embedding one) plus overrides."""
    raw = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"{path}: malformed config{where}: {getattr(e, 'problem', e)}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        if "manifest_version" in raw:
            raw = raw["config"]
    cfg = apply_overrides(_merge(DEFAULTS, raw), sets)
    validate(cfg)
    return cfg


def _positive_int(cfg, dotted):
    node = cfg
    for p in dotted.split("."):
        node = node[p]
    if not isinstance(node, int) or isinstance(node, bool) or node < 1:
        raise ConfigError(f"field '{dotted}' must be a positive integer, got {node!r}")


def validate(cfg: dict) -> None:
    for f in ("data.n_train", "data.n_test", "data.n_pool", "evaluate.n_per", "sweep.folds",
              "train.batch_size", "train.epochs", "train.repr_dim"):
        _positive_int(cfg, f)
    if not isinstance(cfg["seed"], int):
        raise ConfigError("field 'seed' must be an integer")
    for f in ("source", "pool"):
        try:
            JointSpec(**cfg["data"][f])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"field 'data.{f}': {e}") from None
    if not 0 < cfg["data"]["train_fraction"] < 1:
        raise ConfigError("field 'data.train_fraction' must be in (0, 1)")
    for obj in cfg["sweep"]["objectives"]:
        if obj not in OBJECTIVES:
            raise ConfigError(f"field 'sweep.objectives': unknown objective {obj!r}")
    try:
        train_config(cfg)
        for obj in cfg["models"]:
            train_config(cfg, obj)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"field 'train': {e}") from None
    if any(not 0 <= m <= 1 for m in cfg["evaluate"]["family"]):
        raise ConfigError("field 'evaluate.family' must hold probabilities")


def train_config(cfg: dict, objective=None, **over) -> TrainConfig:
    """Build a TrainConfig from the `train` block, optionally with a model preset."""
    t = dict(cfg["train"])
    if objective is not None:
        t["objective"] = objective
        t.update(cfg["models"].get(objective, {}))
    t.update(over)
    gamma = t.pop("gamma")
    return TrainConfig(kernel=KernelConfig(float(gamma)), seed=cfg["seed"],
                       **{k: (float(v) if k in ("alpha", "l2") else v) for k, v in t.items()})


def sweep_grid(cfg: dict) -> list:
    sw = cfg["sweep"]
    grid = []
    for obj in sw["objectives"]:
        if obj == "erm":
            grid += [train_config(cfg, "erm", l2=float(l2), alpha=0.0) for l2 in sw["l2"]]
        else:
            grid += [train_config(cfg, obj, alpha=float(a), gamma=float(g))
                     for a in sw["alpha"] for g in sw["gamma"]]
    return grid
