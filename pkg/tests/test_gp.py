import math

import numpy as np
import pytest

from rpmbo.gp import (
    GammaPrior,
    GpModel,
    Kernel,
    fit_map,
    neg_log_marginal_likelihood,
    posterior,
    posterior_sample,
    predict,
)


def dense_posterior(Z, y, kernel, noise, mean, zq):
    """Direct matrix-inverse evaluation of the posterior formulas."""
    K = kernel(Z, Z) + noise * np.eye(len(y))
    Ks = kernel(Z, zq[None, :])[:, 0]
    Kinv = np.linalg.inv(K)
    mu = Ks @ Kinv @ (y - mean) + mean
    var = kernel(zq[None, :], zq[None, :])[0, 0] - Ks @ Kinv @ Ks
    return mu, var


def test_prior_when_empty():
    model = GpModel(np.zeros((0, 3)), np.zeros(0))
    assert posterior(model, np.array([0.3, -1.0, 2.0])) == (0.0, 1.0)


def test_noiseless_interpolation_single():
    model = GpModel(np.array([[0.4, 0.1]]), np.array([2.5]), Kernel(1.3), noise=0.0)
    mu, var = posterior(model, np.array([0.4, 0.1]))
    assert mu == pytest.approx(2.5, abs=1e-8)
    assert var == pytest.approx(0.0, abs=1e-8)


def test_two_point_explicit_inverse():
    # K = [[1.1, e^-1], [e^-1, 1.1]], k* = [e^-0.25, e^-0.25]
    Z = np.array([[0.0], [1.0]])
    y = np.array([1.0, -1.0])
    model = GpModel(Z, y, Kernel(1.0), noise=0.1)
    e1, e25 = math.exp(-1.0), math.exp(-0.25)
    det = 1.1 * 1.1 - e1 * e1
    inv = np.array([[1.1, -e1], [-e1, 1.1]]) / det
    ks = np.array([e25, e25])
    mu_ref = ks @ inv @ y
    var_ref = 1.0 - ks @ inv @ ks
    mu, var = posterior(model, np.array([0.5]))
    assert mu == pytest.approx(mu_ref, abs=1e-12)
    assert mu == pytest.approx(0.0, abs=1e-12)
    assert var == pytest.approx(var_ref, abs=1e-12)


@pytest.mark.parametrize("n", [1, 3, 5, 8])
def test_oracle_equivalence(rng, n):
    for _ in range(5):
        Z = rng.uniform(-1, 1, (n, 3))
        y = rng.standard_normal(n)
        kern = Kernel(rng.uniform(0.3, 3), rng.uniform(0.5, 2))
        noise = rng.uniform(1e-3, 0.5)
        model = GpModel(Z, y, kern, noise=noise, mean=0.3)
        for _ in range(5):
            zq = rng.uniform(-1.5, 1.5, 3)
            mu, var = posterior(model, zq)
            mu_ref, var_ref = dense_posterior(Z, y, kern, noise, 0.3, zq)
            assert mu == pytest.approx(mu_ref, abs=1e-8)
            assert var == pytest.approx(var_ref, abs=1e-8)


def test_variance_nonnegative(rng):
    model = GpModel(rng.uniform(-1, 1, (30, 2)), rng.standard_normal(30), Kernel(2.0), noise=1e-6)
    _, var = predict(model, rng.uniform(-1.2, 1.2, (10_000, 2)))
    assert np.all(var >= 0)


def test_interpolation_noiseless(rng):
    Z = rng.uniform(-1, 1, (6, 2))
    y = rng.standard_normal(6)
    model = GpModel(Z, y, Kernel(1.5), noise=0.0)
    mu, _ = predict(model, Z)
    np.testing.assert_allclose(mu, y, atol=1e-8)


def test_extra_observation_never_increases_variance(rng):
    Z = rng.uniform(-1, 1, (5, 2))
    y = rng.standard_normal(5)
    q = rng.uniform(-1, 1, (50, 2))
    small = GpModel(Z[:4], y[:4], Kernel(1.2), noise=0.0)
    big = GpModel(Z, y, Kernel(1.2), noise=0.0)
    assert np.all(predict(big, q)[1] <= predict(small, q)[1] + 1e-12)


def test_nll_scalar_cases():
    m0 = GpModel(np.array([[0.0]]), np.array([0.0]), Kernel(1.0), noise=0.0)
    assert neg_log_marginal_likelihood(m0) == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)
    assert neg_log_marginal_likelihood(m0) == pytest.approx(0.91894, abs=1e-5)
    c = 1.7
    m1 = GpModel(np.array([[0.0]]), np.array([c]), Kernel(1.0), noise=0.0)
    assert neg_log_marginal_likelihood(m1) == pytest.approx(0.5 * c * c + 0.5 * math.log(2 * math.pi), abs=1e-12)


def test_nll_matches_dense_formula(rng):
    Z = rng.uniform(-1, 1, (7, 2))
    y = rng.standard_normal(7)
    model = GpModel(Z, y, Kernel(0.8, 1.3), noise=0.05, mean=0.2)
    K = model.kernel(Z, Z) + 0.05 * np.eye(7)
    yc = y - 0.2
    ref = 0.5 * yc @ np.linalg.solve(K, yc) + 0.5 * np.linalg.slogdet(K)[1] + 3.5 * math.log(2 * math.pi)
    assert neg_log_marginal_likelihood(model) == pytest.approx(ref, abs=1e-10)


def test_duplicate_points_still_factorize():
    Z = np.array([[0.1, 0.2], [0.1, 0.2], [0.5, 0.5]])
    model = GpModel(Z, np.array([1.0, 1.0, 0.0]), Kernel(1.0), noise=1e-6)
    assert np.isfinite(neg_log_marginal_likelihood(model))


def _gp_draw(a, n, seed, noise=1e-4):
    rng = np.random.default_rng(seed)
    Z = rng.uniform(-1, 1, (n, 2))
    K = Kernel(a)(Z, Z) + noise * np.eye(n)
    y = np.linalg.cholesky(K) @ rng.standard_normal(n)
    return Z, y


def test_fit_recovers_lengthscale():
    Z, y = _gp_draw(2.0, 60, seed=4)
    fitted = fit_map(GpModel(Z, y), GammaPrior(1.0, 0.15))
    assert 1.0 <= fitted.kernel.lengthscale <= 4.0


def test_strong_prior_shrinks_lengthscale():
    Z, y = _gp_draw(2.0, 40, seed=8)
    flat = fit_map(GpModel(Z, y), None)
    strong = fit_map(GpModel(Z, y), GammaPrior(1.0, 50.0))
    assert strong.kernel.lengthscale < flat.kernel.lengthscale


def test_fit_identical_targets():
    Z = np.array([[0.0, 0.0], [1.0, 1.0]])
    fitted = fit_map(GpModel(Z, np.array([3.0, 3.0])), GammaPrior())
    assert fitted.noise >= 1e-6
    assert np.all(np.isfinite(predict(fitted, Z)[0]))


def test_fit_deterministic(rng):
    Z, y = _gp_draw(1.0, 20, seed=1)
    a = fit_map(GpModel(Z, y))
    b = fit_map(GpModel(Z, y))
    assert a.kernel == b.kernel and a.noise == b.noise


def test_fit_converges_to_map():
    # the optimum should not be improved by a local grid around it
    from rpmbo.gp import hyper_objective, sq_dists, standardization

    Z, y = _gp_draw(1.5, 30, seed=2, noise=1e-2)
    fitted = fit_map(GpModel(Z, y), GammaPrior())
    mu, sd = standardization(y)
    x = np.log([fitted.kernel.lengthscale, fitted.noise / sd**2, fitted.kernel.signal / sd**2])
    f0, _ = hyper_objective(x, sq_dists(Z, Z), (y - mu) / sd, GammaPrior())
    for delta in np.eye(3) * 0.05:
        for s in (1, -1):
            f1, _ = hyper_objective(x + s * delta, sq_dists(Z, Z), (y - mu) / sd, GammaPrior())
            assert f1 >= f0 - 1e-6


def test_hyper_gradient_fd(rng):
    from rpmbo.gp import hyper_objective, sq_dists

    Z = rng.uniform(-1, 1, (6, 2))
    y = rng.standard_normal(6)
    x = np.array([0.2, -2.0, 0.1])
    f, g = hyper_objective(x, sq_dists(Z, Z), y, GammaPrior())
    eps = 1e-6
    num = [(hyper_objective(x + eps * e, sq_dists(Z, Z), y, GammaPrior())[0]
            - hyper_objective(x - eps * e, sq_dists(Z, Z), y, GammaPrior())[0]) / (2 * eps) for e in np.eye(3)]
    np.testing.assert_allclose(g, num, rtol=1e-5)


def test_sample_at_training_point_noiseless():
    Z = np.array([[0.0, 0.0], [1.0, 0.5]])
    model = GpModel(Z, np.array([0.7, -0.2]), Kernel(1.0), noise=0.0)
    for seed in range(20):
        s = posterior_sample(model, Z[:1], seed)
        assert s[0] == pytest.approx(0.7, abs=1e-6)


def test_sample_mean_monte_carlo():
    Z = np.array([[0.0], [1.0]])
    model = GpModel(Z, np.array([1.0, -1.0]), Kernel(1.0), noise=0.1)
    q = np.array([[0.3]])
    mu, var = predict(model, q)
    draws = np.array([posterior_sample(model, q, seed)[0] for seed in range(10_000)])
    se = math.sqrt(var[0] / len(draws))
    assert abs(draws.mean() - mu[0]) < 3 * se


def test_samples_far_apart_are_independent():
    model = GpModel(np.zeros((0, 1)), np.zeros(0), Kernel(5.0))
    pts = np.array([[0.0], [3.0]])
    draws = np.array([posterior_sample(model, pts, seed) for seed in range(10_000)])
    assert abs(np.corrcoef(draws.T)[0, 1]) < 0.1


def test_sample_deterministic():
    model = GpModel(np.array([[0.0]]), np.array([1.0]), Kernel(1.0), noise=0.1)
    pts = np.array([[0.2], [0.8]])
    np.testing.assert_array_equal(posterior_sample(model, pts, 5), posterior_sample(model, pts, 5))
