"""Shallow differentiable classifier f(x) = sigmoid(w . phi(x) + c).

phi is either affine (``linear``) or affine followed by tanh (``mlp``).
Parameters live in a plain dict of arrays so gradients share the layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, log_expit

ARCHS = ("linear", "mlp")
PARAM_NAMES = ("W", "b", "w", "c")


@dataclass(frozen=True, eq=False)
class Predictor:
    arch: str
    params: dict = field(repr=False)

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}")
        p = {k: np.array(self.params[k], dtype=float) for k in PARAM_NAMES}
        r, _ = p["W"].shape
        if p["b"].shape != (r,) or p["w"].shape != (r,) or p["c"].shape != ():
            raise ValueError("inconsistent parameter shapes")
        for a in p.values():
            if not np.isfinite(a).all():
                raise ValueError("non-finite parameter")
            a.setflags(write=False)
        object.__setattr__(self, "params", p)

    @property
    def repr_dim(self) -> int:
        return self.params["W"].shape[0]

    @property
    def input_dim(self) -> int:
        return self.params["W"].shape[1]

    @classmethod
    def init(cls, input_dim: int, repr_dim: int = 8, arch: str = "linear",
             rng: Optional[np.random.Generator] = None, scale: Optional[float] = None) -> "Predictor":
        rng = np.random.default_rng(0) if rng is None else rng
        scale = 1.0 / np.sqrt(input_dim) if scale is None else scale
        return cls(arch, {
            "W": scale * rng.standard_normal((repr_dim, input_dim)),
            "b": np.zeros(repr_dim),
            "w": rng.standard_normal(repr_dim) / np.sqrt(repr_dim),
            "c": np.array(0.0),
        })

    @classmethod
    def zeros(cls, input_dim: int, repr_dim: int, arch: str = "linear") -> "Predictor":
        return cls(arch, {"W": np.zeros((repr_dim, input_dim)), "b": np.zeros(repr_dim),
                          "w": np.zeros(repr_dim), "c": np.array(0.0)})

    def replace(self, **updates) -> "Predictor":
        p = dict(self.params)
        p.update(updates)
        return Predictor(self.arch, p)

    # -- flat view, used by finite-difference checks and the optimizer
    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_NAMES])

    def with_flat(self, theta: np.ndarray) -> "Predictor":
        out, i = {}, 0
        for k in PARAM_NAMES:
            shape = self.params[k].shape
            size = int(np.prod(shape))
            out[k] = np.asarray(theta[i : i + size]).reshape(shape)
            i += size
        return Predictor(self.arch, out)

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "shapes": {k: list(self.params[k].shape) for k in PARAM_NAMES},
            "params": {k: self.params[k].ravel().tolist() for k in PARAM_NAMES},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Predictor":
        params = {k: np.array(d["params"][k], dtype=float).reshape(d["shapes"][k]) for k in PARAM_NAMES}
        return cls(d["arch"], params)


def _check_dim(p: Predictor, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.input_dim:
        raise ValueError(f"expected {p.input_dim} features, got {x.shape[-1]}")
    return x


def forward_repr(p: Predictor, x) -> np.ndarray:
    x = _check_dim(p, x)
    pre = x @ p.params["W"].T + p.params["b"]
    return pre if p.arch == "linear" else np.tanh(pre)


def logits(p: Predictor, x) -> np.ndarray:
    return forward_repr(p, x) @ p.params["w"] + p.params["c"]


def forward(p: Predictor, x):
    out = expit(logits(p, x))
    return float(out) if np.ndim(out) == 0 else out


def bce_from_logits(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    # -[y log sigmoid(s) + (1-y) log sigmoid(-s)], stable for large |s|
    return -(y * log_expit(s) + (1 - y) * log_expit(-s))


def normalized_weights(n: int, weights=None) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError("per-example weights length mismatch")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    tot = w.sum()
    if tot <= 0:
        raise ValueError("all-zero per-example weights")
    return w / tot


def backprop(p: Predictor, x: np.ndarray, z: np.ndarray, dz: np.ndarray, ds: np.ndarray) -> dict:
    """Gradients of a scalar given d/d(logit) ``ds`` and extra d/d(repr) ``dz``."""
    grads = {"w": z.T @ ds, "c": np.array(ds.sum())}
    dz = dz + np.outer(ds, p.params["w"])
    dpre = dz if p.arch == "linear" else dz * (1.0 - z**2)
    grads["W"] = dpre.T @ x
    grads["b"] = dpre.sum(axis=0)
    return grads


def loss_and_grad(p: Predictor, x, y, per_example_weights=None):
    """Weight-normalized mean cross-entropy and its exact gradient dict."""
    x = _check_dim(p, np.atleast_2d(x))
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("empty batch")
    a = normalized_weights(n, per_example_weights)
    z = forward_repr(p, x)
    s = z @ p.params["w"] + p.params["c"]
    loss = float(a @ bce_from_logits(s, y))
    ds = a * (expit(s) - y)
    return loss, backprop(p, x, z, np.zeros_like(z), ds)


def save_checkpoint(path, p: Predictor, train_config: Optional[dict] = None) -> None:
    payload = p.to_dict()
    payload["train_config"] = train_config
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_checkpoint(path) -> tuple:
    with open(path) as fh:
        d = json.load(fh)
    return Predictor.from_dict(d), d.get("train_config")
