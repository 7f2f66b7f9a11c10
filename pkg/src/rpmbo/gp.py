"""Exact GP regression with the kernel s * exp(-a^2 ||z - z'||^2).

Note that ``a`` multiplies the distance, so large ``a`` means short
correlation length. A gamma prior is placed on ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, eigh, solve_triangular
from scipy.optimize import minimize

from .errors import FitFailureError, IllConditionedKernelError
from .seeding import as_generator
from .stats import gamma_log_density

JITTER_LADDER = (1e-10, 1e-8, 1e-6)
NOISE_FLOOR = 1e-6
LENGTHSCALE_BOUNDS = (1e-3, 1e3)
_LOG_2PI = math.log(2.0 * math.pi)


def sq_dists(Z1, Z2) -> np.ndarray:
    Z1 = np.atleast_2d(Z1)
    Z2 = np.atleast_2d(Z2)
    d = (Z1 * Z1).sum(1)[:, None] + (Z2 * Z2).sum(1)[None, :] - 2.0 * Z1 @ Z2.T
    return np.maximum(d, 0.0)


@dataclass(frozen=True)
class Kernel:
    lengthscale: float = 1.0
    signal: float = 1.0

    def __post_init__(self):
        if not (self.lengthscale > 0 and self.signal > 0):
            raise ValueError("kernel lengthscale and signal must be positive")

    def __call__(self, Z1, Z2) -> np.ndarray:
        return self.signal * np.exp(-(self.lengthscale**2) * sq_dists(Z1, Z2))


@dataclass(frozen=True)
class GammaPrior:
    """Gamma prior on the lengthscale ``a``; ``rate`` may be read as a scale."""

    shape: float = 1.0
    rate: float = 0.15
    parameterization: str = "rate"

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("gamma prior parameters must be positive")
        if self.parameterization not in ("rate", "scale"):
            raise ValueError("parameterization must be 'rate' or 'scale'")

    @property
    def effective_rate(self) -> float:
        return self.rate if self.parameterization == "rate" else 1.0 / self.rate

    def log_density(self, a: float) -> float:
        return gamma_log_density(a, self.shape, self.effective_rate)

    def dlog_dloga(self, a: float) -> float:
        """d log p(a) / d log a."""
        return (self.shape - 1.0) - self.effective_rate * a


def factorize(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K, escalating diagonal jitter on failure."""
    n = K.shape[0]
    for jitter in (0.0,) + JITTER_LADDER:
        try:
            L = cholesky(K + jitter * np.eye(n), lower=True, check_finite=True)
            return L, jitter
        except (LinAlgError, ValueError):
            continue
    raise IllConditionedKernelError("kernel matrix is not positive definite even with jitter")


@dataclass(frozen=True, eq=False)
class GpModel:
    Z: np.ndarray
    y: np.ndarray
    kernel: Kernel = field(default_factory=Kernel)
    noise: float = 1e-6
    mean: float = 0.0

    chol: np.ndarray = field(init=False, repr=False)
    alpha: np.ndarray = field(init=False, repr=False)
    jitter: float = field(init=False, repr=False)

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if Z.size == 0:
            Z = Z.reshape(0, Z.shape[-1] if Z.ndim == 2 else 0)
        if Z.shape[0] != y.shape[0]:
            raise ValueError("Z and y must have the same number of rows")
        if self.noise < 0:
            raise ValueError("noise variance must be non-negative")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "y", y)
        if y.size:
            K = self.kernel(Z, Z) + self.noise * np.eye(y.size)
            L, jitter = factorize(K)
            alpha = cho_solve((L, True), y - self.mean)
        else:
            L, jitter, alpha = np.zeros((0, 0)), 0.0, np.zeros(0)
        object.__setattr__(self, "chol", L)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "jitter", jitter)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    def with_data(self, Z, y) -> "GpModel":
        return replace(self, Z=Z, y=y)

    def with_hypers(self, **kw) -> "GpModel":
        kernel = Kernel(kw.pop("lengthscale", self.kernel.lengthscale), kw.pop("signal", self.kernel.signal))
        return replace(self, kernel=kernel, **kw)


def predict(model: GpModel, Zq) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and (latent) variance at the rows of Zq."""
    Zq = np.atleast_2d(np.asarray(Zq, dtype=float))
    prior_var = np.full(Zq.shape[0], model.kernel.signal)
    if model.n == 0:
        return np.full(Zq.shape[0], model.mean), prior_var
    Ks = model.kernel(model.Z, Zq)
    mean = model.mean + Ks.T @ model.alpha
    V = solve_triangular(model.chol, Ks, lower=True)
    var = prior_var - np.sum(V * V, axis=0)
    return mean, np.maximum(var, 0.0)


def posterior(model: GpModel, z) -> tuple[float, float]:
    mu, var = predict(model, np.asarray(z, dtype=float)[None, :])
    return float(mu[0]), float(var[0])


def neg_log_marginal_likelihood(model: GpModel) -> float:
    if model.n == 0:
        raise ValueError("marginal likelihood needs at least one observation")
    yc = model.y - model.mean
    logdet = 2.0 * np.sum(np.log(np.diag(model.chol)))
    return float(0.5 * yc @ model.alpha + 0.5 * logdet + 0.5 * model.n * _LOG_2PI)


def evidence_terms(Kf: np.ndarray, noise: float, yc: np.ndarray):
    """NLL of centered targets under N(0, Kf + noise I) and dNLL/dK.

    Returns ``(nll, W)`` with W = (K^-1 - alpha alpha^T) / 2, so that
    dNLL = sum(W * dK) for any symmetric perturbation dK.
    """
    n = yc.size
    L, _ = factorize(Kf + noise * np.eye(n))
    alpha = cho_solve((L, True), yc)
    nll = 0.5 * yc @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * _LOG_2PI
    Kinv = cho_solve((L, True), np.eye(n))
    W = 0.5 * (Kinv - np.outer(alpha, alpha))
    return float(nll), W


def hyper_objective(log_params, sqd, yc, prior, learn_signal=True):
    """Negative log posterior over (log a, log noise[, log signal]) and its gradient."""
    log_a, log_noise = log_params[0], log_params[1]
    log_s = log_params[2] if learn_signal else 0.0
    a, noise, s = math.exp(log_a), math.exp(log_noise), math.exp(log_s)
    E = np.exp(-(a * a) * sqd)
    Kf = s * E
    nll, W = evidence_terms(Kf, noise, yc)
    g_log_a = float(np.sum(W * Kf * (-2.0 * a * a) * sqd))
    g_log_noise = float(np.trace(W)) * noise
    g_log_s = float(np.sum(W * Kf))
    if prior is not None:
        nll -= prior.log_density(a)
        g_log_a -= prior.dlog_dloga(a)
    grad = [g_log_a, g_log_noise] + ([g_log_s] if learn_signal else [])
    return nll, np.array(grad)


def standardization(y) -> tuple[float, float]:
    y = np.asarray(y, dtype=float)
    mu = float(np.mean(y))
    sd = float(np.std(y))
    if not sd > 1e-12:
        sd = 1.0
    return mu, sd


def fit_map(
    model: GpModel,
    prior: GammaPrior | None = GammaPrior(),
    *,
    learn_signal: bool = True,
    standardize: bool = True,
    noise_floor: float = NOISE_FLOOR,
    n_starts: int = 5,
) -> GpModel:
    """MAP estimate of (a, noise[, signal]) under the gamma prior on ``a``.

    Targets are standardized before fitting; the returned model carries the
    de-standardized mean, signal and noise so predictions are in raw units.
    ``prior=None`` gives the maximum-likelihood fit.
    """
    if model.n < 2:
        raise ValueError("fit_map needs at least two observations")
    mu, sd = standardization(model.y) if standardize else (model.mean, 1.0)
    yc = (model.y - mu) / sd
    sqd = sq_dists(model.Z, model.Z)
    lo_a, hi_a = LENGTHSCALE_BOUNDS
    bounds = [(math.log(lo_a), math.log(hi_a)), (math.log(noise_floor), math.log(10.0))]
    if learn_signal:
        bounds.append((math.log(1e-4), math.log(1e2)))

    starts = []
    a0 = min(max(model.kernel.lengthscale, lo_a), hi_a)
    for a in [a0] + list(np.logspace(-2, 2, n_starts)):
        x0 = [math.log(a), math.log(max(1e-2, noise_floor))]
        if learn_signal:
            x0.append(0.0)
        starts.append(np.array(x0))

    best = None
    for x0 in starts:
        try:
            res = minimize(
                hyper_objective, x0, args=(sqd, yc, prior, learn_signal),
                jac=True, method="L-BFGS-B", bounds=bounds,
            )
        except IllConditionedKernelError:
            continue
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun - 1e-12):
            best = res
    if best is None:
        raise FitFailureError("every hyperparameter start was ill-conditioned")
    a = math.exp(best.x[0])
    noise = math.exp(best.x[1])
    s = math.exp(best.x[2]) if learn_signal else 1.0
    return GpModel(model.Z, model.y, Kernel(a, s * sd * sd), noise=noise * sd * sd, mean=mu)


def posterior_sample(model: GpModel, points, seed=0, n_samples: int | None = None) -> np.ndarray:
    """Joint draw of the latent function at ``points``.

    With ``n_samples`` returns an (n_samples, len(points)) array of draws.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    mean, _ = predict(model, P)
    cov = model.kernel(P, P)
    if model.n:
        V = solve_triangular(model.chol, model.kernel(model.Z, P), lower=True)
        cov = cov - V.T @ V
    cov = 0.5 * (cov + cov.T)
    root = _psd_root(cov)
    rng = as_generator(seed, "posterior-sample")
    if n_samples is None:
        return mean + root @ rng.standard_normal(P.shape[0])
    return mean + rng.standard_normal((n_samples, P.shape[0])) @ root.T


def _psd_root(cov: np.ndarray) -> np.ndarray:
    n = cov.shape[0]
    scale = max(float(np.max(np.abs(np.diag(cov)))), 1e-300)
    for jitter in (0.0,) + JITTER_LADDER:
        try:
            w, Q = eigh(cov + jitter * np.eye(n))
        except LinAlgError:
            continue
        if w.min() >= -1e-8 * scale - jitter:
            return Q * np.sqrt(np.clip(w, 0.0, None))
    raise IllConditionedKernelError("posterior covariance is not positive semi-definite")
