"""Random orthogonal projections R^D -> R^m and Latin-hypercube designs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import EmptyDesignError, InvalidDimensionError
from .seeding import as_generator


@dataclass(frozen=True)
class SearchSpace:
    """The box [-1, 1]^dim."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidDimensionError("search space needs dim >= 1")

    @property
    def lower(self) -> np.ndarray:
        return -np.ones(self.dim)

    @property
    def upper(self) -> np.ndarray:
        return np.ones(self.dim)

    def clip(self, x):
        return np.clip(x, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class Projection:
    """Row-orthonormal m x D matrix together with the seed that produced it."""

    matrix: np.ndarray
    seed: int = 0

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] > mat.shape[1]:
            raise InvalidDimensionError(f"projection must be m x D with m <= D, got {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def big_d(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def identity(cls, m: int, big_d: int) -> "Projection":
        return cls(np.eye(m, big_d))

    def orthonormality_error(self) -> float:
        a = self.matrix
        return float(np.max(np.abs(a @ a.T - np.eye(self.m))))


def stiefel_qr(z: np.ndarray) -> np.ndarray:
    """Q factor of ``z`` (n x k, n >= k) with the signs fixed so diag(R) > 0.

    For Gaussian ``z`` the result is uniform on the Stiefel manifold.
    """
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def sample_orthogonal(m: int, big_d: int, seed: int = 0) -> Projection:
    """Uniformly random row-orthonormal m x D matrix (QR of a Gaussian D x m matrix)."""
    if m < 1 or big_d < 1:
        raise InvalidDimensionError("dimensions must be positive")
    if m > big_d:
        raise InvalidDimensionError(f"cannot project R^{big_d} onto R^{m} with orthonormal rows")
    rng = as_generator(seed, "projection")
    gauss = rng.standard_normal((big_d, m))
    return Projection(stiefel_qr(gauss).T, seed=int(seed))


def _check_last_dim(x: np.ndarray, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise InvalidDimensionError(f"{what}: expected trailing dimension {n}, got shape {x.shape}")
    return x


def project(p: Projection, x) -> np.ndarray:
    """A x for a vector, or rows of A x for a batch (n x D)."""
    x = _check_last_dim(x, p.big_d, "project")
    return x @ p.matrix.T


def back_project(p: Projection, z) -> np.ndarray:
    """A^T z (vector or batch of rows)."""
    z = _check_last_dim(z, p.m, "back_project")
    return z @ p.matrix


def latin_hypercube(n: int, space: SearchSpace, seed=0) -> np.ndarray:
    """``n`` points in [-1, 1]^D with one sample per stratum per dimension."""
    if n < 1:
        raise EmptyDesignError("latin hypercube needs n >= 1")
    rng = as_generator(seed, "lhs")
    unit = qmc.LatinHypercube(d=space.dim, seed=rng).random(n)
    return 2.0 * unit - 1.0


def jl_distance_ratios(p: Projection, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-pair ratios ||A x - A y|| / ||x - y|| for paired rows of x and y."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.linalg.norm(project(p, diff), axis=-1) / np.linalg.norm(diff, axis=-1)
