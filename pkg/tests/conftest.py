import numpy as np
import pytest

from hankel_sysid import StateSpaceModel, random_stable_model


@pytest.fixture
def scalar():
    return StateSpaceModel([[1.0]], [[0.5]], [[1.0]])


@pytest.fixture
def random_models():
    return [random_stable_model(n, p=1 + n % 2, m=1 + (n // 2) % 2, rho_max=0.9, seed=n)
            for n in range(2, 7)]


def brute_lyapunov(A, Q):
    """Kronecker-product solve of X = A X A^T + Q."""
    n = A.shape[0]
    x = np.linalg.solve(np.eye(n * n) - np.kron(A, A), Q.reshape(-1))
    return x.reshape(n, n)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
