import math

import numpy as np
import pytest

from rpmbo.acquisition import (
    AcquisitionProblem,
    composed_acquisition,
    composed_acquisition_batch,
    ei_from_moments,
    expected_improvement,
    maximize_acquisition,
)
from rpmbo.gp import GpModel, Kernel, predict
from rpmbo.manifolds import IdentityMap, LinearMap, SphereMap
from rpmbo.projections import Projection, sample_orthogonal


def test_ei_at_zero_improvement():
    assert ei_from_moments(0.0, 1.0, 0.0) == pytest.approx(0.39894, abs=1e-5)


def test_ei_unit_improvement():
    assert ei_from_moments(1.0, 1.0, 0.0) == pytest.approx(1.08331, abs=1e-5)


def test_ei_zero_sigma_limits():
    assert ei_from_moments(-0.5, 0.0, 0.0) == 0.0
    assert ei_from_moments(0.7, 0.0, 0.0) == pytest.approx(0.7)
    assert ei_from_moments(-0.5, 1e-12, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_sense_flip():
    assert ei_from_moments(-1.0, 1.0, 0.0, sense="minimize") == pytest.approx(1.08331, abs=1e-5)


def test_ei_from_model():
    model = GpModel(np.zeros((0, 2)), np.zeros(0))
    assert expected_improvement(model, np.zeros(2), 0.0) == pytest.approx(0.39894, abs=1e-5)


def test_ei_nonnegative(rng):
    mu = rng.normal(0, 5, 100_000)
    sig = np.abs(rng.normal(0, 2, 100_000)) * (rng.random(100_000) > 0.1)
    f = rng.normal(0, 5, 100_000)
    assert np.all(ei_from_moments(mu, sig, f) >= 0)


def test_ei_monte_carlo(rng):
    for _ in range(10):
        n = rng.integers(2, 8)
        Z = rng.uniform(-1, 1, (n, 2))
        model = GpModel(Z, rng.standard_normal(n), Kernel(rng.uniform(0.5, 2)), noise=0.01)
        z = rng.uniform(-1, 1, 2)
        f_star = float(model.y.max())
        mu, var = predict(model, z[None, :])
        draws = mu[0] + math.sqrt(var[0]) * rng.standard_normal(1_000_000)
        mc = np.maximum(draws - f_star, 0).mean()
        assert expected_improvement(model, z, f_star) == pytest.approx(mc, abs=2e-3)


def test_ei_monotone_in_sigma():
    for mu, f in [(0.0, 0.0), (-1.0, 0.0), (-3.0, 1.0)]:
        vals = ei_from_moments(mu, np.linspace(0, 5, 200), f)
        assert np.all(np.diff(vals) >= -1e-15)


def test_identity_composition_equals_ei(rng):
    Z = rng.uniform(-1, 1, (5, 3))
    model = GpModel(Z, rng.standard_normal(5), Kernel(1.0), noise=0.01)
    prob = AcquisitionProblem(model, Projection.identity(3, 3), IdentityMap(3), f_star=0.1, sense="maximize")
    for z in rng.uniform(-1, 1, (10, 3)):
        assert composed_acquisition(prob, z) == pytest.approx(expected_improvement(model, z, 0.1), abs=1e-12)


def test_identical_features_identical_values(rng):
    # z and z + v with A^T v in the null space of the linear map give the same h(A^T z)
    proj = Projection.identity(3, 3)
    lin = LinearMap(np.eye(3)[:, :2])
    model = GpModel(rng.uniform(-1, 1, (4, 3)), rng.standard_normal(4), Kernel(1.0), noise=0.01)
    prob = AcquisitionProblem(model, proj, lin, f_star=0.0)
    a = composed_acquisition(prob, np.array([0.2, 0.3, 0.5]))
    b = composed_acquisition(prob, np.array([0.2, 0.3, -0.9]))
    assert a == b


def test_singular_point_scores_zero():
    model = GpModel(np.zeros((0, 3)), np.zeros(0))
    sph = SphereMap(np.eye(3)[:, :2], 1.0)
    prob = AcquisitionProblem(model, Projection.identity(3, 3), sph, f_star=0.0)
    ei, bad = composed_acquisition_batch(prob, np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]))
    assert bad.tolist() == [True, False] and ei[0] == 0.0


def test_box_half_width_default():
    prob = AcquisitionProblem(GpModel(np.zeros((0, 5)), np.zeros(0)), sample_orthogonal(5, 9, 0), IdentityMap(9), 0.0)
    assert prob.half_width == pytest.approx(math.sqrt(5))


def test_flat_landscape():
    model = GpModel(np.zeros((0, 2)), np.zeros(0))
    prob = AcquisitionProblem(model, Projection.identity(2, 2), IdentityMap(2), f_star=0.0, sense="maximize")
    res = maximize_acquisition(prob, restarts=3, seed=0, raw_samples=16)
    assert res.value == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert np.all(np.abs(res.z) <= math.sqrt(2))


def test_m1_interpolation_positive():
    model = GpModel(np.array([[0.0]]), np.array([0.0]), Kernel(1.0), noise=0.0)
    prob = AcquisitionProblem(model, Projection.identity(1, 1), IdentityMap(1), f_star=0.0)
    assert composed_acquisition(prob, np.array([0.0])) == pytest.approx(0.0, abs=1e-6)
    res = maximize_acquisition(prob, restarts=2, seed=1)
    assert res.value > 0


def _toy_problem(seed):
    rng = np.random.default_rng(seed)
    proj = sample_orthogonal(2, 6, seed)
    sph = SphereMap(np.linalg.qr(rng.standard_normal((6, 3)))[0], 0.8, np.zeros(3))
    X = sph(rng.uniform(-1, 1, (8, 6)))
    Zin = X @ proj.matrix.T
    y = np.sin(3 * Zin[:, 0]) + Zin[:, 1] ** 2
    model = GpModel(Zin, y, Kernel(1.5), noise=1e-4)
    return AcquisitionProblem(model, proj, sph, f_star=float(y.min()), sense="minimize")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_grid_oracle_m2(seed):
    prob = _toy_problem(seed)
    w = prob.half_width
    g = np.linspace(-w, w, 201)
    G = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    grid_vals, _ = composed_acquisition_batch(prob, G)
    res = maximize_acquisition(prob, restarts=10, seed=seed)
    assert res.value >= grid_vals.max() - 1e-3
    assert res.value == pytest.approx(composed_acquisition(prob, res.z))


def test_in_box_and_deterministic():
    prob = _toy_problem(4)
    a = maximize_acquisition(prob, restarts=4, seed=9)
    b = maximize_acquisition(prob, restarts=4, seed=9)
    np.testing.assert_array_equal(a.z, b.z)
    assert np.all(np.abs(a.z) <= prob.half_width)


def test_restarts_validated():
    with pytest.raises(ValueError):
        maximize_acquisition(_toy_problem(0), restarts=0)
