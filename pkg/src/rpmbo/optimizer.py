"""The RPM-BO loop and two baselines (random search, random-embedding BO).

All runners minimize. Evaluated points are clipped to [-1, 1]^D.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .acquisition import AcquisitionProblem, maximize_acquisition
from .benchmarks import ComposedObjective
from .errors import InvalidDimensionError, ObjectiveEvaluationError
from .gp import GammaPrior, GpModel, fit_map
from .losses import TrainingConfig, draw_unlabeled, train_feature_map
from .manifolds import IdentityMap, LinearMap, MixedOracle, SphereMap
from .neural import NeuralMap
from .projections import Projection, SearchSpace, latin_hypercube, project, sample_orthogonal
from .seeding import derive_seed, stream

log = logging.getLogger(__name__)

MAP_KINDS = ("linear", "sphere", "neural", "mixed-oracle")


@dataclass
class History:
    """Ordered evaluations with per-iteration metadata."""

    X: list = field(default_factory=list)
    y: list = field(default_factory=list)
    meta: list = field(default_factory=list)

    def __len__(self):
        return len(self.y)

    def append(self, x, y, **meta):
        self.X.append(np.asarray(x, dtype=float).copy())
        self.y.append(float(y))
        self.meta.append(meta)

    @property
    def incumbent_index(self) -> int:
        return int(np.argmin(self.y))

    @property
    def incumbent(self) -> float:
        return float(min(self.y))

    def incumbent_trace(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.y, dtype=float))

    def X_array(self) -> np.ndarray:
        return np.vstack(self.X)

    def records(self, include_x: bool = False):
        trace = self.incumbent_trace()
        for i, (x, y, meta) in enumerate(zip(self.X, self.y, self.meta)):
            rec = {"iter": i + 1}
            if include_x:
                rec["x"] = [float(v) for v in x]
            rec["y"] = y
            rec["incumbent"] = float(trace[i])
            rec["wall_ms"] = meta.get("wall_ms")
            rec["acq_value"] = meta.get("acq_value")
            yield rec

    def to_jsonl(self, include_x: bool = False) -> str:
        return "".join(json.dumps(r, sort_keys=False) + "\n" for r in self.records(include_x))

    @classmethod
    def from_jsonl(cls, text: str) -> "History":
        hist = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            hist.append(rec.get("x", []), rec["y"], wall_ms=rec.get("wall_ms"), acq_value=rec.get("acq_value"))
        return hist


@dataclass
class RunConfig:
    big_d: int
    m: int
    d: int = 1
    map_kind: str = "sphere"
    budget: int = 100
    n_init: int = 10
    seed: int = 0
    training: TrainingConfig = field(default_factory=TrainingConfig)
    prior: GammaPrior = field(default_factory=GammaPrior)
    noise_std: float = 0.0
    clip: bool = True
    d1: int = 0
    d2: int = 0
    hidden: int = 35
    rescale: str = "only-if-outside"
    restarts: int = 10
    raw_samples: int = 512
    train_every: int = 1
    half_width: float | None = None
    record_timings: bool = False

    def __post_init__(self):
        if isinstance(self.training, dict):
            self.training = TrainingConfig(**self.training)
        if isinstance(self.prior, dict):
            self.prior = GammaPrior(**self.prior)
        if self.n_init < 2:
            raise ValueError("need at least 2 initial points")
        if self.budget < self.n_init:
            raise ValueError("budget must be >= number of initial points")
        if not 0 < self.m <= self.big_d:
            raise InvalidDimensionError("need 0 < m <= D")
        if self.map_kind not in MAP_KINDS:
            raise ValueError(f"map_kind must be one of {MAP_KINDS}")

    def to_dict(self) -> dict:
        return asdict(self)


def make_feature_map(config: RunConfig, rng):
    D = config.big_d
    if config.map_kind == "linear":
        return LinearMap.random(D, config.d, rng)
    if config.map_kind == "sphere":
        return SphereMap.random(D, config.d, rng)
    if config.map_kind == "neural":
        return NeuralMap.init(D, rng, hidden=config.hidden, rescale=config.rescale)
    return MixedOracle(D, config.d1, config.d2)


class _Evaluator:
    def __init__(self, objective, config: RunConfig, history: History):
        self.objective = objective
        self.noise_std = config.noise_std
        self.rng = stream(config.seed, "evaluation-noise")
        self.history = history
        self.timings = config.record_timings

    def __call__(self, x, t0=None, **meta):
        try:
            if isinstance(self.objective, ComposedObjective):
                y = self.objective(x, rng=self.rng)
            else:
                y = self.objective(x)
            y = float(y)
            if self.noise_std > 0:
                y += self.noise_std * float(self.rng.standard_normal())
            if not math.isfinite(y):
                raise ValueError(f"objective returned {y}")
        except Exception as exc:  # noqa: BLE001 - any objective failure aborts the run
            raise ObjectiveEvaluationError(f"objective failed at evaluation {len(self.history) + 1}: {exc}",
                                           self.history) from exc
        wall = round((time.perf_counter() - t0) * 1e3, 3) if (self.timings and t0 is not None) else None
        self.history.append(x, y, wall_ms=wall, **meta)
        return y


def _clip(config, x):
    return np.clip(x, -1.0, 1.0) if config.clip else x


def rpmbo_run(objective, config: RunConfig, projection: Projection | None = None) -> History:
    """Random-projection manifold BO on the box [-1, 1]^D."""
    seed = config.seed
    D, m = config.big_d, config.m
    tc = config.training
    unlabeled = draw_unlabeled(D, tc.q, tc.p, derive_seed(seed, "unlabeled"))
    A = projection or sample_orthogonal(m, D, derive_seed(seed, "projection"))
    h = make_feature_map(config, stream(seed, "feature-map"))
    history = History()
    evaluate = _Evaluator(objective, config, history)

    t0 = time.perf_counter()
    X0 = latin_hypercube(config.n_init, SearchSpace(D), derive_seed(seed, "initial-design"))
    for x in X0:
        evaluate(x, t0, acq_value=None)
        t0 = time.perf_counter()

    std_hypers = None
    it = 0
    while len(history) < config.budget:
        t0 = time.perf_counter()
        X = history.X_array()
        y = np.asarray(history.y)
        train_loss = None
        if h.trainable and it % config.train_every == 0 and tc.steps > 0:
            res = train_feature_map(
                h, X, y, unlabeled, tc, seed=derive_seed(seed, "train", it),
                hypers=std_hypers if tc.warm_start else None, prior=config.prior,
            )
            h = res.map
            std_hypers = res.standardized_hypers
            train_loss = res.final_loss
        feats = project(A, np.nan_to_num(h(X, allow_singular=True)))
        model = fit_map(GpModel(feats, y), config.prior, learn_signal=tc.learn_signal)
        prob = AcquisitionProblem(model, A, h, float(np.min(y)), sense="minimize", half_width=config.half_width)
        acq = maximize_acquisition(prob, config.restarts, seed=derive_seed(seed, "acquisition", it),
                                   raw_samples=config.raw_samples)
        x_next = prob.candidate(acq.z)
        if not np.all(np.isfinite(x_next)):
            x_next = np.zeros(D)
        evaluate(_clip(config, x_next), t0, acq_value=acq.value, train_loss=train_loss)
        it += 1
    return history


def random_search_run(objective, config: RunConfig) -> History:
    history = History()
    evaluate = _Evaluator(objective, config, history)
    rng = stream(config.seed, "random-search")
    for _ in range(config.budget):
        t0 = time.perf_counter()
        evaluate(rng.uniform(-1.0, 1.0, config.big_d), t0, acq_value=None)
    return history


def random_embedding_run(objective, config: RunConfig, projection: Projection | None = None) -> History:
    """Plain EI-BO over u in [-sqrt(m), sqrt(m)]^m, evaluating clip(A^T u)."""
    seed = config.seed
    D, m = config.big_d, config.m
    A = projection or sample_orthogonal(m, D, derive_seed(seed, "projection"))
    w = config.half_width if config.half_width is not None else math.sqrt(m)
    history = History()
    evaluate = _Evaluator(objective, config, history)
    U0 = w * latin_hypercube(config.n_init, SearchSpace(m), derive_seed(seed, "initial-design"))
    low = []
    t0 = time.perf_counter()
    for u in U0:
        evaluate(np.clip(u @ A.matrix, -1.0, 1.0), t0, acq_value=None)
        low.append(u)
        t0 = time.perf_counter()
    ident = Projection.identity(m, m)
    it = 0
    while len(history) < config.budget:
        t0 = time.perf_counter()
        y = np.asarray(history.y)
        model = fit_map(GpModel(np.vstack(low), y), config.prior)
        prob = AcquisitionProblem(model, ident, IdentityMap(m), float(np.min(y)), sense="minimize", half_width=w)
        acq = maximize_acquisition(prob, config.restarts, seed=derive_seed(seed, "acquisition", it),
                                   raw_samples=config.raw_samples)
        low.append(acq.z)
        evaluate(np.clip(acq.z @ A.matrix, -1.0, 1.0), t0, acq_value=acq.value)
        it += 1
    return history


RUNNERS = {"rpmbo": rpmbo_run, "random-search": random_search_run, "random-embedding": random_embedding_run}

