import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from laplace_asymptotics import PolynomialFunctional, normalize

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def curie_weiss(beta=0.5):
    m = normalize([[-1.0], [1.0]], [0.5, 0.5])
    phi = PolynomialFunctional.from_tensors(1, {2: np.array([[beta / 2]])})
    return m, phi


def cubic_three_point():
    m = normalize([[-1.0], [0.0], [2.0]], [0.5, 0.3, 0.2])
    phi = PolynomialFunctional.from_tensors(1, {2: np.array([[0.15]]), 3: np.array([[[0.02]]])})
    return m, phi


def torus(s=8, a=(0.2, -0.1, 0.05)):
    """Empirical-measure model on ``s`` grid points with a rank-3 quadratic interaction."""
    j = np.arange(s)
    basis = np.sqrt(2) * np.array([
        np.cos(2 * np.pi * j / s), np.sin(2 * np.pi * j / s), np.cos(4 * np.pi * j / s)])
    V = (basis.T * np.asarray(a)) @ basis
    m = normalize(np.eye(s), np.ones(s))
    return m, PolynomialFunctional.from_tensors(s, {2: V}), V


def random_measure(rng, s=None, d=None):
    s = s or int(rng.integers(2, 6))
    d = d or int(rng.integers(1, 3))
    pts = rng.normal(size=(s, d))
    w = rng.uniform(0.2, 1.0, size=s)
    return normalize(pts, w)


def random_functional(rng, d, degree=4, scale=0.1):
    tensors = {m: scale * rng.normal(size=(d,) * m) for m in range(2, degree + 1)}
    return PolynomialFunctional.from_tensors(d, tensors)


@pytest.fixture
def cw():
    return curie_weiss(0.5)


@pytest.fixture
def cubic():
    return cubic_three_point()


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[2:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
