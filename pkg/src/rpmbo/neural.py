"""One-hidden-layer ReLU network h: R^D -> R^D with manual backprop, plus Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RescaleSingularityError, TrainingDivergedError
from .manifolds import FeatureMap, _decode, _encode

RESCALE_MODES = ("always", "only-if-outside", "off")


class NeuralMap(FeatureMap):
    """D -> hidden (ReLU) -> D, followed by the max-abs output rescale.

    rescale="always" divides every output by its largest absolute entry,
    "only-if-outside" does so only when that entry exceeds 1, "off" never.
    """

    kind = "neural"
    trainable = True
    exact_projection = False

    def __init__(self, w1, b1, w2, b2, rescale="only-if-outside"):
        self.w1 = np.array(w1, dtype=float)
        self.b1 = np.array(b1, dtype=float)
        self.w2 = np.array(w2, dtype=float)
        self.b2 = np.array(b2, dtype=float)
        hidden, big_d = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.shape != (big_d, hidden) or self.b2.shape != (big_d,):
            raise ValueError("inconsistent layer shapes")
        if rescale not in RESCALE_MODES:
            raise ValueError(f"rescale must be one of {RESCALE_MODES}")
        super().__init__(big_d)
        self.rescale = rescale

    @classmethod
    def init(cls, big_d: int, rng, hidden: int = 35, rescale="only-if-outside") -> "NeuralMap":
        """Fan-in scaled uniform initialization."""
        lim1 = 1.0 / np.sqrt(big_d)
        lim2 = 1.0 / np.sqrt(hidden)
        return cls(
            rng.uniform(-lim1, lim1, (hidden, big_d)),
            rng.uniform(-lim1, lim1, hidden),
            rng.uniform(-lim2, lim2, (big_d, hidden)),
            rng.uniform(-lim2, lim2, big_d),
            rescale=rescale,
        )

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def forward(self, X, allow_singular=False):
        pre = X @ self.w1.T + self.b1
        act = np.maximum(pre, 0.0)
        raw = act @ self.w2.T + self.b2
        n = raw.shape[0]
        idx = np.argmax(np.abs(raw), axis=1)
        peak = np.abs(raw[np.arange(n), idx])
        if self.rescale == "always":
            if np.any(peak == 0.0):
                if not allow_singular:
                    raise RescaleSingularityError("network output is identically zero")
            scale = np.where(peak == 0.0, np.nan, peak)
        elif self.rescale == "only-if-outside":
            scale = np.where(peak > 1.0, peak, 1.0)
        else:
            scale = np.ones(n)
        out = raw / scale[:, None]
        return out, (X, pre, act, raw, idx, scale)

    def backward(self, cache, G):
        X, pre, act, raw, idx, scale = cache
        n = raw.shape[0]
        rows = np.arange(n)
        g_raw = G / scale[:, None]
        # the argmax entry is held fixed; its magnitude is differentiated
        rescaled = scale != 1.0
        if self.rescale == "always":
            rescaled = np.ones(n, dtype=bool)
        if rescaled.any():
            peak_val = raw[rows, idx]
            corr = np.sum(G * raw, axis=1) * np.sign(peak_val) / scale**2
            g_raw[rows[rescaled], idx[rescaled]] -= corr[rescaled]
        d_w2 = g_raw.T @ act
        d_b2 = g_raw.sum(axis=0)
        g_act = g_raw @ self.w2
        g_pre = g_act * (pre > 0)
        d_w1 = g_pre.T @ X
        d_b1 = g_pre.sum(axis=0)
        g_x = g_pre @ self.w1
        return {"w1": d_w1, "b1": d_b1, "w2": d_w2, "b2": d_b2}, g_x

    def raw_output(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.maximum(X @ self.w1.T + self.b1, 0.0) @ self.w2.T + self.b2

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def to_dict(self):
        return {
            "kind": self.kind,
            "rescale": self.rescale,
            **{k: _encode(v) for k, v in self.params().items()},
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            _decode(obj["w1"]), _decode(obj["b1"]), _decode(obj["w2"]), _decode(obj["b2"]),
            rescale=obj.get("rescale", "only-if-outside"),
        )


def nn_forward(fmap: NeuralMap, x) -> np.ndarray:
    return fmap(x)


def nn_backward(fmap: NeuralMap, x, upstream):
    """Gradients of upstream . h(x) with respect to the parameters and x."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    G = np.atleast_2d(np.asarray(upstream, dtype=float))
    _, cache = fmap.forward(X)
    grads, gx = fmap.backward(cache, G)
    return grads, (gx[0] if np.ndim(x) == 1 else gx)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> dict:
    """One Adam update; returns new parameter arrays and updates ``state``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for {name!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    out = {}
    for name, p in params.items():
        g = np.asarray(grads.get(name, 0.0), dtype=float)
        m = state.m.get(name, 0.0) * b1 + (1 - b1) * g
        v = state.v.get(name, 0.0) * b2 + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - b1**state.t)
        v_hat = v / (1 - b2**state.t)
        out[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out
