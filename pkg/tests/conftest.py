import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lgdsbandit.environment import LgdsSpec
from lgdsbandit.numerics import stationary_covariance

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_stable_spec(rng, d, k, rho=0.8, sigma2=None, unit=True):
    """Small Gaussian spec with spectral radius rho and stationary sigma0."""
    T = rng.standard_normal((d, d))
    gamma = rho * T / np.max(np.abs(np.linalg.eigvals(T)))
    R = rng.standard_normal((d, d))
    Q = R @ R.T + 0.1 * np.eye(d)
    A = rng.standard_normal((k, d))
    if unit:
        A /= np.linalg.norm(A, axis=1, keepdims=True)
    s2 = rng.uniform(0.1, 2.0) if sigma2 is None else sigma2
    return LgdsSpec(gamma=gamma, actions=A, Q=Q, sigma=np.sqrt(s2),
                    sigma0=stationary_covariance(gamma, Q))


def diag_spec(gamma, Q, sigma2, actions, sigma0=None):
    gamma = np.atleast_2d(gamma)
    d = gamma.shape[0]
    return LgdsSpec(gamma=gamma, actions=np.atleast_2d(actions), Q=np.atleast_2d(Q),
                    sigma=np.sqrt(sigma2), sigma0=np.eye(d) if sigma0 is None else np.atleast_2d(sigma0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
