"""Synthetic test functions composed with low-dimensional manifolds.

Objective ids look like ``ackley-sphere-D500-d10``, ``rhe-mixed-D200-d5-d10``
(d1 = 5 circle pairs, d2 = 10 linear coordinates) or
``levy-linear-D100-d10-s3``. Optional suffixes: ``-perm`` hides the active
coordinates behind a seeded permutation, ``-noise0.1`` adds Gaussian noise
with that standard deviation, ``-s<int>`` sets the structural seed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensionError, SingularProjectionError, UnknownObjectiveError
from .manifolds import LinearMap, MixedOracle, SphereMap
from .projections import sample_orthogonal
from .seeding import as_generator

BASE_KINDS = ("ackley", "rotated-hyper-ellipsoid", "levy")
_ALIASES = {"ackley": "ackley", "rhe": "rotated-hyper-ellipsoid", "hyper": "rotated-hyper-ellipsoid",
            "rotated-hyper-ellipsoid": "rotated-hyper-ellipsoid", "levy": "levy"}


def ackley(Z):
    Z = np.atleast_2d(Z)
    d = Z.shape[1]
    t1 = -20.0 * np.exp(-0.2 * np.sqrt(np.sum(Z * Z, axis=1) / d))
    t2 = -np.exp(np.sum(np.cos(2.0 * np.pi * Z), axis=1) / d)
    return t1 + t2 + 20.0 + math.e


def rotated_hyper_ellipsoid(Z):
    Z = np.atleast_2d(Z)
    # sum_i sum_{j<=i} z_j^2 = sum_j (d - j) z_j^2 with 0-based j
    d = Z.shape[1]
    return (Z * Z) @ np.arange(d, 0, -1, dtype=float)


def levy(Z):
    Z = np.atleast_2d(Z)
    w = 1.0 + (Z - 1.0) / 4.0
    head = np.sin(np.pi * w[:, 0]) ** 2
    mid = np.sum((w[:, :-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * w[:, :-1] + 1.0) ** 2), axis=1)
    tail = (w[:, -1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[:, -1]) ** 2)
    return head + mid + tail


_BASE_FUNCS = {"ackley": ackley, "rotated-hyper-ellipsoid": rotated_hyper_ellipsoid, "levy": levy}


@dataclass(frozen=True)
class BaseFunction:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ValueError(f"unknown base function {self.kind!r}")
        if self.dim < 1:
            raise InvalidDimensionError("latent dim must be >= 1")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise InvalidDimensionError(f"{self.kind} expects dimension {self.dim}, got {z.shape}")
        out = _BASE_FUNCS[self.kind](z)
        return float(out[0]) if z.ndim == 1 else out

    def minimizer(self) -> np.ndarray:
        return np.ones(self.dim) if self.kind == "levy" else np.zeros(self.dim)


def eval_base(f: BaseFunction, z) -> float:
    return f(z)


@dataclass(eq=False)
class ComposedObjective:
    """f(x) = g(latent(x)) + noise on the ambient box [-1, 1]^D."""

    base: BaseFunction
    manifold: str
    big_d: int
    d: int = 0
    d1: int = 0
    d2: int = 0
    rotation: np.ndarray | None = None
    active: np.ndarray | None = None
    noise: float = 0.0
    latent_scale: float = 1.0
    name: str = ""
    n_evals: int = field(default=0, compare=False)

    def __post_init__(self):
        k = self.n_active
        if self.manifold in ("sphere", "mixed"):
            if k > self.big_d:
                raise InvalidDimensionError("active coordinates do not fit in D")
            self.active = np.arange(k) if self.active is None else np.asarray(self.active, dtype=int)
        elif self.manifold == "linear":
            R = np.asarray(self.rotation, dtype=float)
            if R.shape != (self.d, self.big_d):
                raise InvalidDimensionError("rotation must be d x D")
            self.rotation = R
        else:
            raise ValueError(f"unknown manifold kind {self.manifold!r}")

    @property
    def n_active(self) -> int:
        if self.manifold == "sphere":
            return self.d + 1
        if self.manifold == "mixed":
            return 2 * self.d1 + self.d2
        return self.d

    def latent(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.big_d:
            raise InvalidDimensionError(f"objective expects dimension {self.big_d}, got {x.shape}")
        X = np.atleast_2d(x)
        if self.manifold == "linear":
            Z = X @ self.rotation.T
        elif self.manifold == "sphere":
            A = X[:, self.active]
            norms = np.linalg.norm(A, axis=1)
            if np.any(norms == 0.0):
                raise SingularProjectionError("active coordinates are all zero")
            Z = A / norms[:, None]
        else:
            A = X[:, self.active].copy()
            pairs = A[:, : 2 * self.d1].reshape(X.shape[0], self.d1, 2)
            norms = np.linalg.norm(pairs, axis=2)
            if np.any(norms == 0.0):
                raise SingularProjectionError("a torus pair is zero")
            A[:, : 2 * self.d1] = (pairs / norms[:, :, None]).reshape(X.shape[0], -1)
            Z = A
        Z = self.latent_scale * Z
        return Z[0] if x.ndim == 1 else Z

    def __call__(self, x, rng=None):
        value = self.base(self.latent(x))
        if self.noise > 0 and rng is not None:
            rng = as_generator(rng, "noise")
            value = value + self.noise * rng.standard_normal(np.shape(value))
        self.n_evals += 1 if np.ndim(value) == 0 else len(value)
        return float(value) if np.ndim(value) == 0 else value

    def true_map(self):
        """The exact projection onto the effective manifold."""
        if self.manifold == "linear":
            return LinearMap(self.rotation.T)
        if self.manifold == "sphere":
            return SphereMap(np.eye(self.big_d)[:, self.active], radius=1.0)
        return MixedOracle(self.big_d, self.d1, self.d2, self.active)


def eval_composed(obj: ComposedObjective, x, noise_seed=None) -> float:
    return obj(x, rng=noise_seed)


def _active_coords(k, big_d, permute_seed):
    if permute_seed is None:
        return np.arange(k)
    return as_generator(permute_seed, "active-permutation").permutation(big_d)[:k]


def make_sphere_objective(base: str, big_d: int, d: int, noise=0.0, permute_seed=None, **kw) -> ComposedObjective:
    base = _ALIASES.get(base, base)
    return ComposedObjective(BaseFunction(base, d + 1), "sphere", big_d, d=d,
                             active=_active_coords(d + 1, big_d, permute_seed), noise=noise, **kw)


def make_mixed_objective(base: str, big_d: int, d1: int, d2: int, noise=0.0, permute_seed=None, **kw):
    base = _ALIASES.get(base, base)
    return ComposedObjective(BaseFunction(base, 2 * d1 + d2), "mixed", big_d, d=d1 + d2, d1=d1, d2=d2,
                             active=_active_coords(2 * d1 + d2, big_d, permute_seed), noise=noise, **kw)


def make_linear_objective(base, big_d: int, d: int, seed=0, noise=0.0, **kw) -> ComposedObjective:
    """f(x) = g(R x) with a seeded row-orthonormal d x D matrix R."""
    if isinstance(base, BaseFunction):
        base = base.kind
    base = _ALIASES.get(base, base)
    if d > big_d:
        raise InvalidDimensionError("d must not exceed D")
    R = np.eye(d) if d == big_d and seed is None else sample_orthogonal(d, big_d, seed or 0).matrix
    return ComposedObjective(BaseFunction(base, d), "linear", big_d, d=d, rotation=np.array(R), noise=noise, **kw)


_ID_RE = re.compile(
    r"^(?P<base>[a-z\-]+?)-(?P<manifold>sphere|mixed|linear)-D(?P<D>\d+)-d(?P<d>\d+)"
    r"(?:-d(?P<d2>\d+))?(?P<rest>(?:-[a-z]+[0-9.e\-]*)*)$"
)


def make_objective(objective_id: str) -> ComposedObjective:
    """Build an objective from its registry id."""
    mt = _ID_RE.match(objective_id)
    if not mt or _ALIASES.get(mt["base"]) is None:
        raise UnknownObjectiveError(objective_id)
    base = _ALIASES[mt["base"]]
    big_d, d = int(mt["D"]), int(mt["d"])
    noise, seed, perm = 0.0, 0, False
    for tok in filter(None, mt["rest"].split("-")):
        if tok == "perm":
            perm = True
        elif tok.startswith("noise"):
            noise = float(tok[5:])
        elif tok.startswith("s") and tok[1:].isdigit():
            seed = int(tok[1:])
        else:
            raise UnknownObjectiveError(objective_id)
    permute_seed = seed if perm else None
    manifold = mt["manifold"]
    try:
        if manifold == "sphere":
            obj = make_sphere_objective(base, big_d, d, noise, permute_seed)
        elif manifold == "mixed":
            if mt["d2"] is None:
                raise UnknownObjectiveError(objective_id)
            obj = make_mixed_objective(base, big_d, d, int(mt["d2"]), noise, permute_seed)
        else:
            obj = make_linear_objective(base, big_d, d, seed, noise)
    except InvalidDimensionError as exc:
        raise UnknownObjectiveError(f"{objective_id}: {exc}") from exc
    obj.name = objective_id
    return obj
