import numpy as np
import pytest
from hypothesis import given, strategies as st

from morphgame.config import DaimlConfig
from morphgame.errors import InsufficientData, SingularGram
from morphgame.meta import (N_CONDITIONS, PhiNet, adapt, daiml_step, disc_loss_and_grad, discriminator_forward,
                            evaluate_prediction, init_discriminator, kron_features, ls_adapt, mlp_forward,
                            phi_loss_and_grad, predict, train_daiml)
from morphgame.nets import Mlp


def flat_grad(dWs, dbs):
    return np.concatenate([p.ravel() for pair in zip(dWs, dbs) for p in pair])


def numeric_grad(fun, theta, step=1e-5):
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = step
        g[i] = (fun(theta + e) - fun(theta - e)) / (2 * step)
    return g


def small_problem(seed, alpha):
    rng = np.random.default_rng(seed)
    phi = PhiNet.init(rng, hidden=(6, 5), m=3, x_scale=rng.uniform(0.5, 2.0, 5))
    disc = init_discriminator(rng, m=3, hidden=7)
    X = rng.normal(size=(8, 5))
    Y = rng.normal(size=(8, 5))
    a = rng.normal(size=15)
    return phi, disc, a, X, Y, int(rng.integers(N_CONDITIONS)), alpha


def test_feature_map_block_structure(rng):
    phi = PhiNet.init(rng)
    fm = mlp_forward(phi, rng.normal(size=5))
    m = phi.m
    for i in range(5):
        for j in range(5 * m):
            if not i * m <= j < (i + 1) * m:
                assert fm.Phi[i, j] == 0
        np.testing.assert_array_equal(fm.Phi[i, i * m:(i + 1) * m], fm.phi_features)
    np.testing.assert_array_equal(kron_features(fm.phi_features[None])[0], fm.Phi)


def test_zero_network_gives_zero_features():
    phi = PhiNet(Mlp.zeros((5, 64, 64, 32, 5)))
    assert np.all(mlp_forward(phi, np.ones(5)).Phi == 0)


def test_predict_matches_kron(rng):
    phi = PhiNet.init(rng)
    a = rng.normal(size=25)
    X = rng.normal(size=(4, 5))
    expected = np.array([mlp_forward(phi, x).Phi @ a for x in X])
    np.testing.assert_allclose(predict(phi, a, X), expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("alpha", [0.0, 0.1])
def test_phi_gradient(seed, alpha):
    phi, disc, a, X, Y, k, alpha = small_problem(seed, alpha)

    def loss(theta):
        probe = phi.copy()
        probe.mlp.set_flat(theta)
        return phi_loss_and_grad(probe, disc, a, X, Y, k, alpha)[0]

    _, _, _, dWs, dbs = phi_loss_and_grad(phi, disc, a, X, Y, k, alpha)
    analytic = flat_grad(dWs, dbs)
    numeric = numeric_grad(loss, phi.mlp.flat())
    assert np.linalg.norm(analytic - numeric) <= 1e-4 * np.linalg.norm(numeric)


def test_phi_gradient_splits_into_terms():
    phi, disc, a, X, Y, k, _ = small_problem(3, 0.0)
    g_reg = flat_grad(*phi_loss_and_grad(phi, disc, a, X, Y, k, 0.0)[3:])
    g_full = flat_grad(*phi_loss_and_grad(phi, disc, a, X, Y, k, 0.1)[3:])
    g_ce = flat_grad(*phi_loss_and_grad(phi, disc, a, X, Y, k, 1.0)[3:])
    np.testing.assert_allclose(g_full, g_reg - 0.1 * (g_reg - g_ce), atol=1e-12)
    loss, reg, ce, _, _ = phi_loss_and_grad(phi, disc, a, X, Y, k, 0.0)
    assert loss == reg


@pytest.mark.parametrize("seed", range(20))
def test_discriminator_gradient(seed):
    rng = np.random.default_rng(seed)
    disc = init_discriminator(rng, m=5, hidden=9)
    F = rng.normal(size=(6, 5))
    k = int(rng.integers(N_CONDITIONS))

    def loss(theta):
        probe = disc.copy()
        probe.set_flat(theta)
        return disc_loss_and_grad(probe, F, k)[0]

    analytic = flat_grad(*disc_loss_and_grad(disc, F, k)[2:])
    numeric = numeric_grad(loss, disc.flat())
    assert np.linalg.norm(analytic - numeric) <= 1e-4 * np.linalg.norm(numeric)


def test_discriminator_output_simplex(rng):
    disc = init_discriminator(rng)
    P = discriminator_forward(disc, rng.normal(size=(50, 5)))
    assert P.shape == (50, 6)
    assert np.all(P > 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert disc.sizes == [5, 128, 6]


# least squares

def test_ls_identity():
    y = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(ls_adapt(np.eye(3), y, lam=0.0, gamma=10.0), y, atol=1e-14)


def test_ls_cap_rescales():
    y = np.array([12.0, 16.0])  # norm 20
    a = ls_adapt(np.eye(2), y, lam=0.0, gamma=10.0)
    assert np.linalg.norm(a) == pytest.approx(10.0)
    np.testing.assert_allclose(a / np.linalg.norm(a), y / 20.0)


def test_ls_matches_pseudo_inverse(rng):
    Phi = rng.normal(size=(40, 6))
    y = rng.normal(size=40)
    np.testing.assert_allclose(ls_adapt(Phi, y, lam=0.0), np.linalg.pinv(Phi) @ y, atol=1e-8)


def test_ls_rank_deficient():
    Phi = np.zeros((4, 3))
    Phi[:, 0] = 1.0
    with pytest.raises(SingularGram):
        ls_adapt(Phi, np.ones(4), lam=0.0)
    # default ridge regularizes
    assert np.all(np.isfinite(ls_adapt(Phi, np.ones(4))))


@given(st.integers(0, 10_000), st.floats(0.1, 20.0))
def test_ls_norm_cap_property(seed, gamma):
    rng = np.random.default_rng(seed)
    a = ls_adapt(rng.normal(size=(20, 5)), rng.normal(size=20) * 10, gamma=gamma)
    assert np.linalg.norm(a) <= gamma * (1 + 1e-12)


# training

def synthetic_task(seed=0, n=600):
    rng = np.random.default_rng(seed)
    true = Mlp.init((5, 16, 5), rng)
    coeffs = rng.normal(size=(N_CONDITIONS, 25))
    X = rng.normal(size=(N_CONDITIONS * n, 5))
    k = np.repeat(np.arange(N_CONDITIONS), n)
    F = kron_features(true(X))
    Y = np.einsum("nij,nj->ni", F, coeffs[k]) + 0.01 * rng.normal(size=(len(X), 5))
    order = rng.permutation(len(X))
    split = int(0.8 * len(X))
    return (X, Y, k), order[:split], order[split:]


@pytest.fixture(scope="module")
def synthetic_run():
    (X, Y, k), tr, va = synthetic_task()
    cfg = DaimlConfig(epochs=60, K=32, B=96)
    phi, disc, hist = train_daiml(X[tr], Y[tr], k[tr], cfg)
    return (X, Y, k), tr, va, cfg, phi, hist


def test_synthetic_recovery(synthetic_run):
    (X, Y, k), tr, va, cfg, phi, _ = synthetic_run
    mse, _ = evaluate_prediction(phi, X[tr], Y[tr], k[tr], X[va], Y[va], k[va], gamma=cfg.gamma)
    assert mse < 0.1 * Y[va].var()


def test_synthetic_loss_history(synthetic_run):
    *_, hist = synthetic_run
    reg = np.asarray(hist["reg"])
    assert np.all(np.isfinite(reg)) and np.all(np.isfinite(hist["adv"]))
    # mean over consecutive windows of 10 epochs
    blocks = reg[:len(reg) // 10 * 10].reshape(-1, 10).mean(axis=1)
    assert np.all(np.diff(blocks) <= 0)


def test_spectral_bound_after_training(synthetic_run):
    *_, cfg, phi, _ = synthetic_run
    for W in phi.mlp.weights:
        assert np.linalg.norm(W, 2) <= cfg.spectral_bound * (1 + 1e-9)


def test_training_is_deterministic():
    (X, Y, k), tr, _ = synthetic_task(n=300)
    cfg = DaimlConfig(epochs=3, K=16, B=48)
    h1 = train_daiml(X[tr], Y[tr], k[tr], cfg)[2]
    h2 = train_daiml(X[tr], Y[tr], k[tr], cfg)[2]
    assert h1 == h2


def test_insufficient_data():
    (X, Y, k), _, _ = synthetic_task(n=50)
    with pytest.raises(InsufficientData):
        train_daiml(X, Y, k, DaimlConfig(K=32, B=224))


def test_daiml_step_updates_and_caps():
    rng = np.random.default_rng(0)
    phi = PhiNet.init(rng)
    disc = init_discriminator(rng)
    X = rng.normal(size=(40, 5))
    Y = 100 * rng.normal(size=(40, 5))
    cfg = DaimlConfig(K=8, B=32, gamma=1.0, spectral_bound=0.5)
    before = phi.mlp.flat()
    phi, disc, info = daiml_step(phi, disc, (X[:8], Y[:8]), (X[8:], Y[8:]), 2, cfg, rng)
    assert np.linalg.norm(info["a"]) <= 1.0 + 1e-12
    assert not np.array_equal(before, phi.mlp.flat())
    for W in phi.mlp.weights:
        assert np.linalg.norm(W, 2) <= 0.5 * (1 + 1e-9)


def test_discriminator_update_frequency():
    rng = np.random.default_rng(1)
    phi = PhiNet.init(rng, hidden=(4,), m=2)
    disc = init_discriminator(rng, m=2, hidden=4)
    X = rng.normal(size=(6, 5))
    Y = rng.normal(size=(6, 5))
    cfg = DaimlConfig(K=3, B=3, eta=0.5, m=2)
    updates = 0
    for _ in range(10_000):
        phi, disc, info = daiml_step(phi, disc, (X[:3], Y[:3]), (X[3:], Y[3:]), 0, cfg, rng)
        updates += info["disc_updated"]
    assert updates / 10_000 == pytest.approx(0.5, abs=0.02)


def test_adapt_uses_kron_stack(rng):
    phi = PhiNet.init(rng)
    X = rng.normal(size=(30, 5))
    a_true = rng.normal(size=25)
    Y = predict(phi, a_true, X)
    np.testing.assert_allclose(adapt(phi, X, Y, lam=0.0), a_true, rtol=1e-5, atol=1e-5)
