"""Scalar numerics: standard normal pdf/cdf and the gamma log-density."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_SQRT_2 = 1.0 / math.sqrt(2.0)


def std_normal_pdf(u):
    u = np.asarray(u, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    return float(out) if out.ndim == 0 else out


def std_normal_cdf(u):
    # erfc keeps relative accuracy in the lower tail, where EI lives
    u = np.asarray(u, dtype=float)
    out = 0.5 * erfc(-u * _INV_SQRT_2)
    return float(out) if out.ndim == 0 else out


def gamma_log_density(a: float, shape: float, rate: float) -> float:
    """log of rate**shape * a**(shape-1) * exp(-rate*a) / Gamma(shape)."""
    if not a > 0:
        raise ValueError(f"gamma density requires a > 0, got {a}")
    if not (shape > 0 and rate > 0):
        raise ValueError("gamma shape and rate must be positive")
    return (
        shape * math.log(rate)
        + (shape - 1.0) * math.log(a)
        - rate * a
        - math.lgamma(shape)
    )
