import numpy as np
import pytest

from oga.embedding_io import EmbeddingSet, TextClassifier, generate_synthetic

# frozen by scripts/reference_fixture.py (brute-force zero-shot loop)
SMALL_FIXTURE = dict(seed=7, K=5, d=16, per_class=200, dispersion=0.3, text_noise=0.1)
SMALL_FIXTURE_ZS_ACC = 0.945
SMALL_FIXTURE_OGA_MEAN = 0.9460699999999999

ACCEPT_FIXTURE = dict(seed=7, K=20, d=32, per_class=100, dispersion=0.3, text_noise=0.15)
ACCEPT_FIXTURE_ZS_ACC = 0.6805


@pytest.fixture(scope="session")
def small_fixture():
    return generate_synthetic(**SMALL_FIXTURE)


@pytest.fixture(scope="session")
def accept_fixture():
    return generate_synthetic(**ACCEPT_FIXTURE)


@pytest.fixture
def tiny_set():
    feats = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [0.8, -0.6]])
    return EmbeddingSet(feats, np.array([0, 1, 1, 0]), 2)


@pytest.fixture
def tiny_classifier():
    return TextClassifier(np.eye(2), 0.01)


def random_spd(rng, d, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.exp(rng.uniform(0, np.log(cond), d))
    return (q * eig) @ q.T


ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
