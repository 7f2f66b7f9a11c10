"""Geometry-aware feature maps and exact manifold projections.

All maps share a small batch interface used by the training code:

* ``forward(X)`` maps rows of ``X`` (n x D) and returns ``(out, cache)``;
* ``backward(cache, G)`` returns ``(param_grads, input_grad)`` for the
  scalar ``sum(G * out)``.

Maps are plain objects; training works on a ``copy()``.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import InvalidDimensionError, SingularProjectionError
from .projections import Projection, stiefel_qr

_TINY = 1e-12


def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != dim:
        raise InvalidDimensionError(f"expected inputs of dimension {dim}, got {x.shape}")
    return x2, single


def _encode(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel(order="C").tolist()}


def _decode(obj: dict) -> np.ndarray:
    return np.asarray(obj["data"], dtype=float).reshape(obj["shape"])


class FeatureMap:
    kind = "abstract"
    trainable = False
    # maps that are exact manifold projections for every parameter value
    exact_projection = True

    def __init__(self, dim: int):
        self.dim = int(dim)

    def forward(self, X, allow_singular=False):
        raise NotImplementedError

    def backward(self, cache, G):
        raise NotImplementedError

    def __call__(self, x, allow_singular=False):
        X, single = _as_batch(x, self.dim)
        out, _ = self.forward(X, allow_singular=allow_singular)
        return out[0] if single else out

    # parameter plumbing -------------------------------------------------
    def params(self) -> dict:
        return {}

    def set_params(self, params: dict) -> None:
        for k, v in params.items():
            setattr(self, k, np.array(v, dtype=float))

    def postprocess(self) -> None:
        """Hook run after each gradient step (e.g. re-orthonormalization)."""

    def copy(self):
        new = object.__new__(type(self))
        new.__dict__.update(
            {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}
        )
        return new

    def span_basis(self) -> np.ndarray:
        """Orthonormal basis of a linear subspace containing the manifold."""
        raise NotImplementedError(f"{self.kind} has no known span")

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class IdentityMap(FeatureMap):
    kind = "identity"

    def forward(self, X, allow_singular=False):
        return np.array(X, dtype=float), None

    def backward(self, cache, G):
        return {}, np.array(G, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


class LinearMap(FeatureMap):
    """h(x) = B B^T x for a D x d basis with orthonormal columns."""

    kind = "linear"
    trainable = True

    def __init__(self, basis):
        basis = np.array(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] > basis.shape[0]:
            raise InvalidDimensionError(f"basis must be D x d with d <= D, got {basis.shape}")
        super().__init__(basis.shape[0])
        self.basis = basis

    @classmethod
    def random(cls, big_d: int, d: int, rng) -> "LinearMap":
        return cls(stiefel_qr(rng.standard_normal((big_d, d))))

    def forward(self, X, allow_singular=False):
        XB = X @ self.basis
        return XB @ self.basis.T, (X, XB)

    def backward(self, cache, G):
        X, XB = cache
        GB = G @ self.basis
        d_basis = G.T @ XB + X.T @ GB
        return {"basis": d_basis}, GB @ self.basis.T

    def params(self):
        return {"basis": self.basis}

    def postprocess(self):
        self.basis = stiefel_qr(self.basis)

    def span_basis(self):
        return stiefel_qr(self.basis)

    def to_dict(self):
        return {"kind": self.kind, "basis": _encode(self.basis)}


class SphereMap(FeatureMap):
    """Radial projection onto a sphere living in the column space of B.

    h(x) = r * B(B^T x - c) / ||B(B^T x - c)|| + B c, with B of shape
    D x (d+1) and the centroid c expressed in the coordinates of B.
    """

    kind = "sphere"
    trainable = True

    def __init__(self, basis, radius=1.0, centroid=None):
        basis = np.array(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] > basis.shape[0]:
            raise InvalidDimensionError(f"basis must be D x (d+1), got {basis.shape}")
        super().__init__(basis.shape[0])
        self.basis = basis
        self.radius = np.array(float(radius))
        if centroid is None:
            centroid = np.zeros(basis.shape[1])
        self.centroid = np.array(centroid, dtype=float)
        if self.centroid.shape != (basis.shape[1],):
            raise InvalidDimensionError("centroid must match the number of basis columns")
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")

    @classmethod
    def random(cls, big_d: int, d: int, rng, radius=1.0) -> "SphereMap":
        return cls(stiefel_qr(rng.standard_normal((big_d, d + 1))), radius=radius)

    def forward(self, X, allow_singular=False):
        B, c, r = self.basis, self.centroid, float(self.radius)
        U = X @ B - c
        V = U @ B.T
        nv = np.linalg.norm(V, axis=1)
        bad = nv <= _TINY
        if bad.any() and not allow_singular:
            raise SingularProjectionError("input projects onto the sphere center")
        safe = np.where(bad, 1.0, nv)
        W = V / safe[:, None]
        out = r * W + B @ c
        if bad.any():
            out[bad] = np.nan
        return out, (X, U, W, safe)

    def backward(self, cache, G):
        X, U, W, nv = cache
        B, c, r = self.basis, self.centroid, float(self.radius)
        GW = np.sum(G * W, axis=1)
        d_radius = np.array(GW.sum())
        GV = (r / nv)[:, None] * (G - W * GW[:, None])
        GU = GV @ B
        Gsum = G.sum(axis=0)
        d_basis = GV.T @ U + X.T @ GU + np.outer(Gsum, c)
        d_centroid = -GU.sum(axis=0) + B.T @ Gsum
        return {"basis": d_basis, "radius": d_radius, "centroid": d_centroid}, GU @ B.T

    def params(self):
        return {"basis": self.basis, "radius": self.radius, "centroid": self.centroid}

    def postprocess(self):
        self.basis = stiefel_qr(self.basis)
        self.radius = np.array(max(abs(float(self.radius)), 1e-6))

    def span_basis(self):
        return stiefel_qr(self.basis)

    def latent_residual(self, p) -> np.ndarray:
        """||B^T p - c|| - r for points p; zero on the sphere."""
        P, _ = _as_batch(p, self.dim)
        return np.linalg.norm(P @ self.basis - self.centroid, axis=1) - float(self.radius)

    def to_dict(self):
        return {
            "kind": self.kind,
            "basis": _encode(self.basis),
            "radius": float(self.radius),
            "centroid": _encode(self.centroid),
        }


class MixedOracle(FeatureMap):
    """Exact projection onto (unit circle)^d1 x R^d2 embedded on chosen axes.

    ``active`` lists the 2*d1 + d2 ambient coordinates: consecutive pairs
    for the circle factors, then the linear coordinates. All other
    coordinates are zeroed.
    """

    kind = "mixed-oracle"

    def __init__(self, big_d: int, d1: int, d2: int, active=None):
        super().__init__(big_d)
        self.d1, self.d2 = int(d1), int(d2)
        k = 2 * self.d1 + self.d2
        if k > big_d or self.d1 < 0 or self.d2 < 0:
            raise InvalidDimensionError("2*d1 + d2 must fit in D")
        self.active = np.arange(k) if active is None else np.asarray(active, dtype=int)
        if self.active.shape != (k,) or len(set(self.active.tolist())) != k:
            raise InvalidDimensionError("active must list 2*d1 + d2 distinct coordinates")

    @property
    def n_active(self) -> int:
        return 2 * self.d1 + self.d2

    def _pairs(self, Z):
        return Z[:, : 2 * self.d1].reshape(Z.shape[0], self.d1, 2)

    def latent(self, X, allow_singular=False):
        Z = X[:, self.active]
        pairs = self._pairs(Z)
        norms = np.linalg.norm(pairs, axis=2)
        bad = norms <= _TINY
        if bad.any() and not allow_singular:
            raise SingularProjectionError("zero torus pair has no unique projection")
        safe = np.where(bad, 1.0, norms)
        unit = pairs / safe[:, :, None]
        unit[bad] = np.nan
        out = Z.copy()
        out[:, : 2 * self.d1] = unit.reshape(X.shape[0], 2 * self.d1)
        return out, (unit, safe)

    def forward(self, X, allow_singular=False):
        Z, (unit, norms) = self.latent(X, allow_singular)
        out = np.zeros_like(X)
        out[:, self.active] = Z
        return out, (unit, norms)

    def backward(self, cache, G):
        unit, norms = cache
        Ga = G[:, self.active]
        gp = self._pairs(Ga)
        dot = np.sum(gp * unit, axis=2, keepdims=True)
        gpair = (gp - unit * dot) / norms[:, :, None]
        grad = np.zeros_like(G)
        Ga = Ga.copy()
        Ga[:, : 2 * self.d1] = gpair.reshape(G.shape[0], 2 * self.d1)
        grad[:, self.active] = Ga
        return {}, grad

    def span_basis(self):
        return np.eye(self.dim)[:, self.active]

    def to_dict(self):
        return {
            "kind": self.kind,
            "dim": self.dim,
            "d1": self.d1,
            "d2": self.d2,
            "active": self.active.tolist(),
        }


# functional wrappers --------------------------------------------------------


def linear_apply(fmap: LinearMap, x) -> np.ndarray:
    return fmap(x)


def sphere_apply(fmap: SphereMap, x) -> np.ndarray:
    return fmap(x)


def mixed_latent(oracle: MixedOracle, x) -> np.ndarray:
    X, single = _as_batch(x, oracle.dim)
    Z, _ = oracle.latent(X)
    return Z[0] if single else Z


def mixed_project(oracle: MixedOracle, x) -> np.ndarray:
    return oracle(x)


def latent_preimage(proj: Projection, fmap: FeatureMap, x) -> np.ndarray:
    """Some z in R^m with P(A^T z) = x for a point x on the manifold.

    Solves span^T A^T z = span^T x in the least-squares sense, which is exact
    whenever span^T A^T has full row rank (true with probability one for
    random A and m >= dim(span)).
    """
    S = fmap.span_basis()
    M = S.T @ proj.matrix.T
    z, *_ = np.linalg.lstsq(M, S.T @ np.asarray(x, dtype=float), rcond=None)
    return z


def map_from_dict(obj: dict) -> FeatureMap:
    kind = obj["kind"]
    if kind == "identity":
        return IdentityMap(obj["dim"])
    if kind == "linear":
        return LinearMap(_decode(obj["basis"]))
    if kind == "sphere":
        return SphereMap(_decode(obj["basis"]), obj["radius"], _decode(obj["centroid"]))
    if kind == "mixed-oracle":
        return MixedOracle(obj["dim"], obj["d1"], obj["d2"], obj["active"])
    if kind == "neural":
        from .neural import NeuralMap

        return NeuralMap.from_dict(obj)
    raise ValueError(f"unknown feature map kind {kind!r}")


def map_from_json(text: str) -> FeatureMap:
    return map_from_dict(json.loads(text))
