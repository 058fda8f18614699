import hypothesis
import numpy as np
import pytest

from morphgame import pipeline
from morphgame.config import Config

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture(params=range(5))
def rng(request):
    return np.random.default_rng(request.param)


def random_hurwitz(rng, n):
    A = rng.normal(size=(n, n))
    shift = np.max(np.linalg.eigvals(A).real) + rng.uniform(0.1, 2.0)
    return A - shift * np.eye(n)


def random_psd(rng, n, rank=None):
    C = rng.normal(size=(rank or n, n))
    return C.T @ C


def random_pd(rng, n):
    return random_psd(rng, n) + 0.1 * np.eye(n)


def random_are_instance(rng, n, m):
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    Q = random_psd(rng, n) + 1e-2 * np.eye(n)
    R = random_pd(rng, m)
    return A, B, Q, R


# acceptance verdicts, echoed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, name, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {name}: {detail}")


# trained artifacts shared by the slower module tests and the acceptance suite


@pytest.fixture(scope="session")
def cfg():
    return Config()


@pytest.fixture(scope="session")
def trim(cfg):
    return pipeline.operating_trim(cfg)


@pytest.fixture(scope="session")
def dataset(cfg, trim):
    return pipeline.collect(cfg, trim)


@pytest.fixture(scope="session")
def trained_phi(cfg, dataset):
    return pipeline.fit_phi(dataset, cfg)


@pytest.fixture(scope="session")
def trained_classifier(cfg, dataset):
    return pipeline.fit_classifier(dataset, cfg)
