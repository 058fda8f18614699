import numpy as np
import pytest
from hypothesis import given, strategies as st

from morphgame.classifier import ClassifierNet, build_features, classify, estimate_xi, train_classifier
from morphgame.config import ClassifierConfig
from morphgame.errors import InsufficientData, NotSimplex
from morphgame.nets import Mlp
from morphgame.vehicle import XI_GRID


def test_zero_weights_uniform():
    net = ClassifierNet(Mlp.zeros((10, 200, 200, 128, 6)))
    np.testing.assert_allclose(classify(net, np.ones(10)), np.full(6, 1 / 6))


def test_architecture(rng):
    assert ClassifierNet.init(rng).mlp.sizes == [10, 200, 200, 128, 6]


def test_output_simplex(rng):
    net = ClassifierNet.init(rng)
    P = classify(net, rng.normal(size=(1000, 10)) * 10)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)


def test_standardization_inside_classify(rng):
    net = ClassifierNet.init(rng, hidden=(8,), mean=np.full(10, 3.0), std=np.full(10, 2.0))
    raw = ClassifierNet(net.mlp)
    x = rng.normal(size=10)
    np.testing.assert_allclose(net.classify(x), raw.classify((x - 3.0) / 2.0))


def test_estimate_xi_examples():
    assert estimate_xi(np.eye(6)[2]) == pytest.approx(0.4)
    assert estimate_xi(np.full(6, 1 / 6)) == pytest.approx(0.5)
    assert estimate_xi(np.array([0, 0.5, 0.5, 0, 0, 0])) == pytest.approx(0.3)


@pytest.mark.parametrize("rho", [np.full(6, 0.2), np.array([1.1, -0.1, 0, 0, 0, 0]), np.ones(5) / 5])
def test_estimate_xi_rejects(rho):
    with pytest.raises(NotSimplex):
        estimate_xi(rho)


@given(st.lists(st.floats(0, 1), min_size=6, max_size=6).filter(lambda v: sum(v) > 1e-3),
       st.lists(st.floats(0, 1), min_size=6, max_size=6).filter(lambda v: sum(v) > 1e-3), st.floats(0, 1))
def test_estimate_xi_affine_and_bounded(r1, r2, lam):
    r1 = np.array(r1) / sum(r1)
    r2 = np.array(r2) / sum(r2)
    mix = estimate_xi(lam * r1 + (1 - lam) * r2)
    assert mix == pytest.approx(lam * estimate_xi(r1) + (1 - lam) * estimate_xi(r2), abs=1e-12)
    assert -1e-12 <= mix <= 1 + 1e-12


def clusters(seed, n=200):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(6, 10)) * 5
    k = np.repeat(np.arange(6), n)
    return centers[k] + rng.normal(size=(6 * n, 10)), k


def test_separable_clusters():
    chi, k = clusters(0)
    net, report = train_classifier(chi, k, ClassifierConfig(hidden=(32, 32), epochs=10))
    assert report["val_accuracy"] >= 0.95
    test_chi, test_k = clusters(0, n=50)
    assert np.mean(net.classify(test_chi).argmax(axis=1) == test_k) >= 0.95


def test_training_deterministic():
    chi, k = clusters(1, n=40)
    cfg = ClassifierConfig(hidden=(16,), epochs=3)
    a, _ = train_classifier(chi, k, cfg)
    b, _ = train_classifier(chi, k, cfg)
    np.testing.assert_array_equal(a.mlp.flat(), b.mlp.flat())


def test_insufficient_data():
    chi, k = clusters(2, n=20)
    with pytest.raises(InsufficientData):
        train_classifier(chi[k != 4], k[k != 4])


def test_build_features_order():
    f = np.arange(5.0)
    x = np.arange(5.0, 10.0)
    np.testing.assert_array_equal(build_features(f, x)[0], np.arange(10.0))


def test_perfect_prediction_zero_loss():
    from morphgame.nets import cross_entropy
    assert cross_entropy(np.eye(6), np.arange(6)) == 0.0
    assert XI_GRID.tolist() == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
