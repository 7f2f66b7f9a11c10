"""Expected improvement in the projected space and its maximization.

Candidates are parameterized by z in the box [-w, w]^m (w = sqrt(m) by
default) and scored at A h(A^T z).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .gp import GpModel, predict
from .manifolds import FeatureMap
from .projections import Projection
from .seeding import as_generator
from .stats import std_normal_cdf, std_normal_pdf

log = logging.getLogger(__name__)

SENSES = ("maximize", "minimize")


def ei_from_moments(mu, sigma, f_star, sense="maximize"):
    """sigma * pdf(u) + imp * cdf(u), u = imp / sigma; max(imp, 0) when sigma = 0."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    imp = mu - f_star if sense == "maximize" else f_star - mu
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    u = imp / safe
    ei = np.where(pos, safe * std_normal_pdf(u) + imp * std_normal_cdf(u), np.maximum(imp, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def expected_improvement(model: GpModel, z, f_star: float, sense: str = "maximize") -> float:
    mu, var = predict(model, np.asarray(z, dtype=float)[None, :])
    return float(ei_from_moments(mu[0], math.sqrt(var[0]), f_star, sense))


@dataclass(frozen=True, eq=False)
class AcquisitionProblem:
    model: GpModel
    projection: Projection
    fmap: FeatureMap
    f_star: float
    sense: str = "minimize"
    half_width: float | None = None

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}")
        if self.half_width is None:
            object.__setattr__(self, "half_width", math.sqrt(self.projection.m))

    @property
    def m(self) -> int:
        return self.projection.m

    def clamp(self, Z):
        return np.clip(Z, -self.half_width, self.half_width)

    def candidate(self, z) -> np.ndarray:
        """h(A^T z) in the ambient space (not clipped to the search box)."""
        return self.fmap(self.clamp(np.asarray(z, dtype=float)) @ self.projection.matrix)


def composed_acquisition_batch(prob: AcquisitionProblem, Z) -> tuple[np.ndarray, np.ndarray]:
    """EI at A h(A^T z) for each row of Z; singular rows score 0 and are flagged."""
    Z = prob.clamp(np.atleast_2d(np.asarray(Z, dtype=float)))
    X, _ = prob.fmap.forward(Z @ prob.projection.matrix, allow_singular=True)
    bad = ~np.all(np.isfinite(X), axis=1)
    X = np.where(bad[:, None], 0.0, X)
    mu, var = predict(prob.model, X @ prob.projection.matrix.T)
    ei = ei_from_moments(mu, np.sqrt(var), prob.f_star, prob.sense)
    ei = np.where(bad, 0.0, np.atleast_1d(ei))
    return ei, bad


def composed_acquisition(prob: AcquisitionProblem, z) -> float:
    ei, _ = composed_acquisition_batch(prob, np.asarray(z, dtype=float)[None, :])
    return float(ei[0])


@dataclass
class AcquisitionResult:
    z: np.ndarray
    value: float
    degenerate: bool = False
    n_evals: int = 0


def _value_and_grad(prob: AcquisitionProblem, step: float, counter: list):
    m = prob.m
    offsets = np.vstack([np.zeros(m), step * np.eye(m), -step * np.eye(m)])

    def fun(z):
        vals, _ = composed_acquisition_batch(prob, z[None, :] + offsets)
        counter[0] += len(vals)
        grad = (vals[1 : m + 1] - vals[m + 1 :]) / (2.0 * step)
        # negated for minimization
        return -vals[0], -grad

    return fun


def maximize_acquisition(
    prob: AcquisitionProblem,
    restarts: int = 10,
    seed=0,
    raw_samples: int = 512,
    maxiter: int = 100,
    fd_step: float = 1e-4,
) -> AcquisitionResult:
    """Multi-start L-BFGS-B over the box with central-difference gradients.

    ``raw_samples`` scrambled Halton points are scored and the best
    ``restarts`` of them seed the local searches.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = as_generator(seed, "acquisition")
    w = prob.half_width
    m = prob.m
    n_raw = max(raw_samples, restarts)
    raw = (2.0 * qmc.Halton(d=m, scramble=True, seed=rng).random(n_raw) - 1.0) * w
    raw_vals, raw_bad = composed_acquisition_batch(prob, raw)
    counter = [n_raw]
    order = np.argsort(-raw_vals, kind="stable")[:restarts]
    bounds = [(-w, w)] * m
    fun = _value_and_grad(prob, fd_step * max(w, 1.0), counter)

    best_z, best_v, best_bad = None, -np.inf, True
    for k in order:
        z0 = raw[k]
        v0 = raw_vals[k]
        z_k, v_k = z0, v0
        if not raw_bad[k]:
            res = minimize(fun, z0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": maxiter})
            z_opt = np.clip(res.x, -w, w)
            v_opt = composed_acquisition(prob, z_opt)
            counter[0] += 1
            if np.isfinite(v_opt) and v_opt > v0:
                z_k, v_k = z_opt, v_opt
        if v_k > best_v:
            best_z, best_v, best_bad = z_k, float(v_k), bool(raw_bad[k])

    degenerate = bool(np.all(raw_bad[order])) or best_z is None
    if degenerate:
        log.warning("all acquisition restarts hit singular points; using the best random probe")
        probes = rng.uniform(-w, w, (max(64, restarts), m))
        vals, bad = composed_acquisition_batch(prob, probes)
        counter[0] += len(vals)
        k = int(np.argmax(np.where(bad, -np.inf, vals))) if not bad.all() else 0
        best_z, best_v = probes[k], float(vals[k])
    return AcquisitionResult(np.asarray(best_z, dtype=float), best_v, degenerate, counter[0])
