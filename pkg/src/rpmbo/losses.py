"""Semi-supervised training objective for feature maps.

The supervised part is the GP negative log evidence with kernel
k(h(x), h(x')); the unsupervised part penalizes violations of
h(lam * x + (1 - lam) * h(x)) = h(x) on unlabeled points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedKernelError, RpmboError, TrainingDivergedError
from .gp import NOISE_FLOOR, GammaPrior, GpModel, Kernel, evidence_terms, fit_map, sq_dists, standardization
from .manifolds import FeatureMap
from .neural import AdamState, adam_step
from .seeding import as_generator

log = logging.getLogger(__name__)

HYPER_KEYS = ("log_lengthscale", "log_noise", "log_signal")


@dataclass
class GpHypers:
    lengthscale: float = 1.0
    noise: float = 1e-2
    signal: float = 1.0
    mean: float = 0.0

    def log_params(self) -> dict:
        return {
            "log_lengthscale": np.array(math.log(self.lengthscale)),
            "log_noise": np.array(math.log(self.noise)),
            "log_signal": np.array(math.log(self.signal)),
        }

    @classmethod
    def from_log_params(cls, params: dict, mean: float = 0.0) -> "GpHypers":
        return cls(
            float(np.exp(params["log_lengthscale"])),
            float(np.exp(params["log_noise"])),
            float(np.exp(params["log_signal"])),
            mean,
        )

    @classmethod
    def from_model(cls, model: GpModel) -> "GpHypers":
        return cls(model.kernel.lengthscale, model.noise, model.kernel.signal, model.mean)


@dataclass
class UnlabeledSet:
    points: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.lambdas = np.asarray(self.lambdas, dtype=float).ravel()
        if self.points.shape[0] < 1 or self.lambdas.size < 1:
            raise ValueError("unlabeled set needs q >= 1 points and p >= 1 coefficients")
        if np.any(self.lambdas <= 0) or np.any(self.lambdas >= 1):
            raise ValueError("coefficients must lie in (0, 1)")
        if np.any(np.abs(self.points) > 1):
            raise ValueError("unlabeled points must lie in [-1, 1]^D")

    @property
    def q(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.lambdas.size


def draw_unlabeled(big_d: int, q: int = 100, p: int = 5, seed=0) -> UnlabeledSet:
    rng = as_generator(seed, "unlabeled")
    points = rng.uniform(-1.0, 1.0, (q, big_d))
    lambdas = rng.uniform(0.0, 1.0, p)
    # uniform(0, 1) can return exactly 0
    lambdas = np.where(lambdas <= 0.0, 0.5, lambdas)
    return UnlabeledSet(points, lambdas)


@dataclass
class TrainingConfig:
    gamma: float = 1.0
    p: int = 5
    q: int = 100
    steps: int = 200
    lr: float = 1e-2
    co_train_hypers: bool = True
    learn_signal: bool = True
    redraw_unlabeled: bool = False
    warm_start: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


def _combine(g1: dict, g2: dict, w: float = 1.0) -> dict:
    out = dict(g1)
    for k, v in g2.items():
        out[k] = out[k] + w * v if k in out else w * v
    return out


def supervised_loss(h: FeatureMap, hypers: GpHypers, X, y, with_grad: bool = False):
    """GP negative log evidence of y with inputs h(X).

    With ``with_grad`` returns ``(loss, map_grads, hyper_grads)`` where the
    hyper gradients are taken with respect to the log-parameters.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    yc = np.asarray(y, dtype=float) - hypers.mean
    if yc.size < 1:
        raise ValueError("supervised loss needs observations")
    feats, cache = h.forward(X)
    a2 = hypers.lengthscale**2
    sqd = sq_dists(feats, feats)
    Kf = hypers.signal * np.exp(-a2 * sqd)
    nll, W = evidence_terms(Kf, hypers.noise, yc)
    if not with_grad:
        return nll
    M = W * Kf
    G = -4.0 * a2 * (M.sum(axis=1)[:, None] * feats - M @ feats)
    map_grads, _ = h.backward(cache, G) if h.trainable else ({}, None)
    hyper_grads = {
        "log_lengthscale": np.array(np.sum(M * (-2.0 * a2) * sqd)),
        "log_noise": np.array(np.trace(W) * hypers.noise),
        "log_signal": np.array(np.sum(M)),
    }
    return nll, map_grads, hyper_grads


def consistency_loss(h: FeatureMap, u: UnlabeledSet, with_grad: bool = False):
    """Mean over (lambda_j, x'_i) of ||h(lam x' + (1 - lam) h(x')) - h(x')||."""
    Xq = u.points
    p, q = u.p, u.q
    lam = u.lambdas[:, None, None]
    Y0, cache0 = h.forward(Xq)
    T = (lam * Xq[None] + (1.0 - lam) * Y0[None]).reshape(p * q, -1)
    Y1, cache1 = h.forward(T)
    R = Y1 - np.tile(Y0, (p, 1))
    norms = np.linalg.norm(R, axis=1)
    loss = float(norms.sum() / (p * q))
    if not with_grad:
        return loss
    if not h.trainable:
        return loss, {}
    safe = np.where(norms > 0.0, norms, 1.0)
    E = np.where(norms[:, None] > 0.0, R / safe[:, None], 0.0) / (p * q)
    g1, gT = h.backward(cache1, E)
    E3 = E.reshape(p, q, -1)
    gT3 = gT.reshape(p, q, -1)
    dY0 = -E3.sum(axis=0) + np.sum((1.0 - lam) * gT3, axis=0)
    g0, _ = h.backward(cache0, dY0)
    return loss, _combine(g1, g0)


def combined_loss(h: FeatureMap, hypers: GpHypers, X, y, u: UnlabeledSet | None, gamma: float, with_grad=False):
    """Supervised loss plus gamma times the consistency loss."""
    if not with_grad:
        ls = supervised_loss(h, hypers, X, y)
        lus = consistency_loss(h, u) if (u is not None and gamma > 0) else 0.0
        return ls + gamma * lus
    ls, mg, hg = supervised_loss(h, hypers, X, y, with_grad=True)
    if u is not None and gamma > 0:
        lus, ug = consistency_loss(h, u, with_grad=True)
        mg = _combine(mg, ug, gamma)
    else:
        lus = 0.0
    return ls + gamma * lus, mg, hg


@dataclass
class TrainResult:
    map: FeatureMap
    hypers: GpHypers
    initial_loss: float
    final_loss: float
    losses: list = field(default_factory=list)
    diverged: bool = False
    standardized_hypers: GpHypers | None = None


def initial_hypers(h: FeatureMap, X, ys, prior: GammaPrior | None, learn_signal=True) -> GpHypers:
    """MAP hypers for standardized targets ys on the current features."""
    feats = h(np.atleast_2d(X), allow_singular=True)
    feats = np.nan_to_num(feats)
    model = fit_map(GpModel(feats, ys, noise=1e-2), prior, learn_signal=learn_signal, standardize=False)
    return GpHypers.from_model(model)


def train_feature_map(
    h: FeatureMap,
    X,
    y,
    u: UnlabeledSet | None,
    config: TrainingConfig = TrainingConfig(),
    seed=0,
    hypers: GpHypers | None = None,
    prior: GammaPrior | None = GammaPrior(),
) -> TrainResult:
    """Adam on the combined loss; returns the best parameters seen.

    Targets are standardized internally; returned hypers are in raw units.
    ``hypers`` (standardized units) warm-starts the GP hyperparameters.
    The consistency term is skipped for exact projection maps, where it
    vanishes identically and only its round-off would be differentiated.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ValueError("training needs at least two labelled points")
    h = h.copy()
    mu, sd = standardization(y)
    ys = (y - mu) / sd
    if hypers is None:
        hypers = initial_hypers(h, X, ys, prior, config.learn_signal)
    hypers = GpHypers(hypers.lengthscale, max(hypers.noise, NOISE_FLOOR), hypers.signal, 0.0)
    rng = as_generator(seed, "train")

    map_keys = list(h.params()) if h.trainable else []
    hyper_keys = list(HYPER_KEYS if config.learn_signal else HYPER_KEYS[:2]) if config.co_train_hypers else []
    state = AdamState()

    def evaluate(fmap, hp, unl):
        return combined_loss(fmap, hp, X, ys, unl, config.gamma, with_grad=True)

    best = None
    losses = []
    initial = None
    diverged = False
    if h.exact_projection:
        u = None
    current_u = u
    for step in range(config.steps + 1):
        if config.redraw_unlabeled and u is not None and step > 0:
            current_u = draw_unlabeled(X.shape[1], u.q, u.p, rng)
        try:
            loss, mg, hg = evaluate(h, hypers, current_u)
            if not math.isfinite(loss):
                raise TrainingDivergedError("non-finite loss")
        except (IllConditionedKernelError, TrainingDivergedError, FloatingPointError, RpmboError) as exc:
            log.warning("feature-map training stopped at step %d: %s", step, exc)
            diverged = True
            break
        losses.append(loss)
        if initial is None:
            initial = loss
        if best is None or loss < best[0]:
            best = (loss, h.copy(), GpHypers(**vars(hypers)))
        if step == config.steps:
            break
        params = {k: h.params()[k] for k in map_keys}
        grads = {k: mg[k] for k in map_keys}
        hp_log = hypers.log_params()
        for k in hyper_keys:
            params[k] = hp_log[k]
            grads[k] = hg[k]
        try:
            new = adam_step(params, grads, state, config.lr)
        except TrainingDivergedError as exc:
            log.warning("feature-map training diverged at step %d: %s", step, exc)
            diverged = True
            break
        if map_keys:
            h.set_params({k: new[k] for k in map_keys})
            h.postprocess()
        if hyper_keys:
            hp_log.update({k: new[k] for k in hyper_keys})
            hp_log["log_noise"] = np.maximum(hp_log["log_noise"], math.log(NOISE_FLOOR))
            hp_log["log_lengthscale"] = np.clip(hp_log["log_lengthscale"], math.log(1e-3), math.log(1e3))
            hypers = GpHypers.from_log_params(hp_log)

    if best is None:
        # not even the starting point could be evaluated
        raw = GpHypers(hypers.lengthscale, hypers.noise * sd * sd, hypers.signal * sd * sd, mu)
        return TrainResult(h, raw, float("nan"), float("nan"), losses, True, hypers)
    loss, best_map, hp = best
    raw = GpHypers(hp.lengthscale, hp.noise * sd * sd, hp.signal * sd * sd, mu)
    return TrainResult(best_map, raw, initial, loss, losses, diverged, hp)
