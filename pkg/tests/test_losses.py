import numpy as np
import pytest

from rpmbo.benchmarks import make_sphere_objective
from rpmbo.gp import GpModel, Kernel, neg_log_marginal_likelihood
from rpmbo.losses import (
    GpHypers,
    TrainingConfig,
    UnlabeledSet,
    combined_loss,
    consistency_loss,
    draw_unlabeled,
    supervised_loss,
    train_feature_map,
)
from rpmbo.manifolds import IdentityMap, LinearMap, SphereMap
from rpmbo.neural import NeuralMap


def half_map():
    # one ReLU unit that stays active on [-1, 1]: h(x) = x / 2
    return NeuralMap([[1.0]], [1.0], [[0.5]], [-0.5], rescale="off")


def random_sphere(rng, D=6, d=3):
    return SphereMap(np.linalg.qr(rng.standard_normal((D, d)))[0], rng.uniform(0.3, 0.8), rng.uniform(-0.2, 0.2, d))


def test_supervised_identity_matches_gp(rng):
    X = rng.uniform(-1, 1, (6, 3))
    y = rng.standard_normal(6)
    hp = GpHypers(0.9, 0.05, 1.4, 0.3)
    ref = neg_log_marginal_likelihood(GpModel(X, y, Kernel(0.9, 1.4), 0.05, 0.3))
    assert supervised_loss(IdentityMap(3), hp, X, y) == pytest.approx(ref, abs=1e-12)


def test_supervised_constant_map_equals_coincident(rng):
    net = NeuralMap(np.zeros((2, 3)), np.zeros(2), np.zeros((3, 2)), [0.1, 0.2, 0.3], rescale="off")
    X = rng.uniform(-1, 1, (4, 3))
    y = rng.standard_normal(4)
    hp = GpHypers(1.0, 0.1, 1.0)
    ref = neg_log_marginal_likelihood(GpModel(np.zeros((4, 3)), y, Kernel(1.0), 0.1))
    assert supervised_loss(net, hp, X, y) == pytest.approx(ref, abs=1e-10)


def test_consistency_hand_value():
    u = UnlabeledSet(np.array([[0.8]]), np.array([0.5]))
    assert consistency_loss(half_map(), u) == pytest.approx(0.1, abs=1e-12)


def test_consistency_identity_zero(rng):
    assert consistency_loss(IdentityMap(5), draw_unlabeled(5, 20, 3, seed=1)) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_consistency_zero_for_exact_maps(seed):
    rng = np.random.default_rng(seed)
    u = draw_unlabeled(8, 50, 5, seed=seed)
    assert consistency_loss(LinearMap.random(8, 3, rng), u) < 1e-9
    assert consistency_loss(random_sphere(rng, 8, 3), u) < 1e-9


def test_consistency_nonnegative(rng):
    for _ in range(10):
        net = NeuralMap.init(4, rng, hidden=5)
        assert consistency_loss(net, draw_unlabeled(4, 10, 2, seed=rng)) >= 0


def test_unlabeled_validation():
    with pytest.raises(ValueError):
        UnlabeledSet(np.zeros((2, 2)), np.array([0.0]))
    with pytest.raises(ValueError):
        UnlabeledSet(np.full((1, 2), 1.5), np.array([0.5]))


def test_combined_gamma_zero_and_linearity(rng):
    net = NeuralMap.init(3, rng, hidden=6)
    X = rng.uniform(-1, 1, (4, 3))
    y = rng.standard_normal(4)
    u = draw_unlabeled(3, 10, 2, seed=3)
    hp = GpHypers(1.1, 0.02, 0.8)
    ls = supervised_loss(net, hp, X, y)
    v = consistency_loss(net, u)
    assert v > 0
    assert combined_loss(net, hp, X, y, u, 0.0) == ls
    assert combined_loss(net, hp, X, y, u, 2.0) - combined_loss(net, hp, X, y, u, 1.0) == pytest.approx(v, abs=1e-12)


def test_combined_exact_map_equals_supervised(rng):
    sph = random_sphere(rng)
    X = rng.uniform(-1, 1, (5, 6))
    y = rng.standard_normal(5)
    hp = GpHypers(1.0, 0.05, 1.0)
    u = draw_unlabeled(6, 30, 5, seed=2)
    assert combined_loss(sph, hp, X, y, u, 3.0) == pytest.approx(supervised_loss(sph, hp, X, y), abs=1e-8)


def _fd_grads(f, params, eps=1e-6):
    out = {}
    for name, p in params.items():
        num = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            fp = f()
            p[i] = old - eps
            fm = f()
            p[i] = old
            num[i] = (fp - fm) / (2 * eps)
        out[name] = num
    return out


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_combined_gradient_neural(n):
    rng = np.random.default_rng(100 + n)
    net = NeuralMap.init(3, rng, hidden=5)
    X = rng.uniform(-1, 1, (n, 3))
    y = rng.standard_normal(n)
    u = draw_unlabeled(3, 6, 2, seed=n)
    hp = GpHypers(1.3, 0.05, 1.2)
    _, mg, _ = combined_loss(net, hp, X, y, u, 1.0, with_grad=True)
    num = _fd_grads(lambda: combined_loss(net, hp, X, y, u, 1.0), net.params())
    for k in num:
        assert _rel(mg[k], num[k]) < 1e-4, k


def test_supervised_gradient_sphere_three_points(rng):
    sph = random_sphere(rng)
    X = rng.uniform(-1, 1, (3, 6))
    y = rng.standard_normal(3)
    hp = GpHypers(1.5, 0.05, 1.0)
    _, mg, _ = supervised_loss(sph, hp, X, y, with_grad=True)
    num = _fd_grads(lambda: supervised_loss(sph, hp, X, y), sph.params())
    for k in num:
        assert _rel(mg[k], num[k]) < 1e-4, k


def test_hyper_gradients(rng):
    X = rng.uniform(-1, 1, (5, 2))
    y = rng.standard_normal(5)
    hp = GpHypers(0.7, 0.1, 1.3)
    _, _, hg = supervised_loss(IdentityMap(2), hp, X, y, with_grad=True)
    logs = hp.log_params()
    for k in logs:
        def f():
            return supervised_loss(IdentityMap(2), GpHypers.from_log_params(logs), X, y)
        num = _fd_grads(f, {k: logs[k]})[k]
        assert float(hg[k]) == pytest.approx(float(num), rel=1e-5)


def _sphere_task(n=50, seed=0):
    obj = make_sphere_objective("ackley", big_d=20, d=3)
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 20))
    y = np.array([obj(x) for x in X])
    return X, y


def test_training_decreases_loss():
    X, y = _sphere_task()
    rng = np.random.default_rng(1)
    sph = SphereMap(np.linalg.qr(rng.standard_normal((20, 3)))[0], 0.5, np.zeros(3))
    res = train_feature_map(sph, X, y, None, TrainingConfig(steps=200), seed=0)
    assert res.final_loss < res.initial_loss


def test_zero_steps_unchanged(rng):
    X, y = _sphere_task(10)
    lin = LinearMap.random(20, 3, rng)
    res = train_feature_map(lin, X, y, None, TrainingConfig(steps=0), seed=0)
    np.testing.assert_array_equal(res.map.basis, lin.basis)


def test_training_deterministic():
    X, y = _sphere_task(15)
    rng = np.random.default_rng(5)
    net = NeuralMap.init(20, rng, hidden=8)
    u = draw_unlabeled(20, 10, 2, seed=0)
    cfg = TrainingConfig(steps=20)
    a = train_feature_map(net, X, y, u, cfg, seed=3)
    b = train_feature_map(net, X, y, u, cfg, seed=3)
    for k in a.map.params():
        np.testing.assert_array_equal(a.map.params()[k], b.map.params()[k])
    assert a.hypers == b.hypers
