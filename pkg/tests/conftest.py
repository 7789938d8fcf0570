import numpy as np
import pytest

from hawkes_uq import EventSequence, Exponential, ModelParams
from hawkes_uq.simulate import simulate


def random_sequence(rng, D=3, T=50.0, n=60):
    times = np.sort(rng.uniform(0, T, n))
    nodes = rng.integers(0, D, n)
    return EventSequence(times, nodes, T, D)


def random_params(rng, D=3, beta=1.0, radius=0.6):
    A = rng.uniform(0.0, 1.0, (D, D)) * (rng.uniform(size=(D, D)) < 0.7)
    rho = max(np.abs(np.linalg.eigvals(A)).max(), 1e-3)
    A *= radius / rho
    mu = rng.uniform(0.3, 1.0, D)
    return ModelParams(mu, A, Exponential(beta))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sparse_params():
    A = np.array([[0.5, 0.0, 0.0], [0.3, 0.2, 0.0], [0.0, 0.4, 0.0]])
    return ModelParams(np.full(3, 0.5), A, Exponential(1.0))


@pytest.fixture(scope="session")
def sparse_seq(sparse_params):
    return simulate(sparse_params, 300.0, 2024)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
