import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laplace_asymptotics.functional import FunctionalError, PolynomialFunctional, pullback, symmetrize
from laplace_asymptotics.measure import ReducedFrame


def test_eval_examples():
    cw = PolynomialFunctional.from_tensors(1, {2: np.array([[0.25]])})
    assert cw(1.0) == 0.25
    assert PolynomialFunctional.zero(3)(np.ones(3)) == 0.0
    cube = PolynomialFunctional.from_tensors(1, {3: np.ones((1, 1, 1))})
    assert cube(2.0) == 8.0


def test_derivative_examples():
    beta = 0.5
    q = PolynomialFunctional.from_tensors(1, {2: np.array([[beta / 2]])})
    for x in (-1.0, 0.3, 2.0):
        assert q.derivative_tensor(x, 2)[0, 0] == beta
        assert q.derivative_tensor(x, 3)[0, 0, 0] == 0.0
        assert q.derivative_tensor(x, 4)[0, 0, 0, 0] == 0.0
    c = 0.7
    cube = PolynomialFunctional.from_tensors(1, {3: np.full((1, 1, 1), c)})
    assert cube.derivative_tensor(1.3, 3)[0, 0, 0] == pytest.approx(6 * c)
    quart = PolynomialFunctional.from_tensors(1, {4: np.full((1,) * 4, c)})
    assert quart.derivative_tensor(-0.4, 4).item() == pytest.approx(24 * c)


def test_derivative_order_limit():
    with pytest.raises(FunctionalError):
        PolynomialFunctional.zero(1).derivative_tensor(0.0, 5)


def test_rejects_asymmetric_and_high_degree():
    with pytest.raises(FunctionalError):
        PolynomialFunctional(2, {2: np.array([[0.0, 1.0], [0.0, 0.0]])})
    with pytest.raises(FunctionalError):
        PolynomialFunctional(1, {7: np.ones((1,) * 7)})


def test_symmetrize_exact():
    t = symmetrize(np.random.default_rng(0).normal(size=(3, 3, 3)))
    assert np.array_equal(t, t.transpose(1, 0, 2)) and np.array_equal(t, t.transpose(2, 1, 0))


def test_batched_eval():
    rng = np.random.default_rng(1)
    phi = PolynomialFunctional.from_tensors(2, {m: rng.normal(size=(2,) * m) for m in range(4)})
    x = rng.normal(size=(5, 2))
    np.testing.assert_allclose(phi.eval(x), [phi(xi) for xi in x], rtol=1e-13)


def test_pullback_identity_frame():
    rng = np.random.default_rng(2)
    phi = PolynomialFunctional.from_tensors(2, {2: rng.normal(size=(2, 2)), 3: rng.normal(size=(2, 2, 2))})
    pb = pullback(phi, ReducedFrame.identity(2))
    for m in (2, 3):
        np.testing.assert_allclose(pb.tensor(m), phi.tensor(m), atol=1e-15)


def test_pullback_linear_offset():
    t1 = np.array([1.0, -2.0])
    phi = PolynomialFunctional(2, {1: t1})
    a = np.array([0.5, 0.25])
    pb = pullback(phi, ReducedFrame(a, np.eye(2)))
    assert float(pb.tensor(0)) == pytest.approx(t1 @ a)


@given(st.integers(0, 10_000))
def test_pullback_agrees_on_random_frames(seed):
    rng = np.random.default_rng(seed)
    d, r = 3, 2
    phi = PolynomialFunctional.from_tensors(d, {m: rng.normal(size=(d,) * m) for m in range(1, 5)})
    q, _ = np.linalg.qr(rng.normal(size=(d, r)))
    frame = ReducedFrame(rng.normal(size=d), q.T)
    pb = pullback(phi, frame)
    z = rng.normal(size=(100, r))
    np.testing.assert_allclose(pb.eval(z), phi.eval(frame.embed(z)), rtol=1e-10, atol=1e-10)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_derivative_matches_finite_differences(seed, order):
    rng = np.random.default_rng(seed)
    d = 2
    phi = PolynomialFunctional.from_tensors(d, {m: rng.normal(size=(d,) * m) for m in range(1, 5)})
    x = rng.normal(size=d)
    u = rng.normal(size=d)
    exact = phi.derivative_tensor(x, order)
    for _ in range(order):
        exact = np.tensordot(exact, u, axes=(0, 0))
    # central difference of the directional derivative of order - 1
    h = 1e-4
    def lower(y):
        t = phi.derivative_tensor(y, order - 1)
        for _ in range(order - 1):
            t = np.tensordot(t, u, axes=(0, 0))
        return float(t)
    fd = (lower(x + h * u) - lower(x - h * u)) / (2 * h)
    assert fd == pytest.approx(float(exact), rel=1e-6, abs=1e-6)


@given(st.integers(0, 10_000))
def test_taylor_identity_degree_four(seed):
    rng = np.random.default_rng(seed)
    d = 2
    phi = PolynomialFunctional.from_tensors(d, {m: rng.normal(size=(d,) * m) for m in range(0, 5)})
    x, y = rng.normal(size=(2, d))
    total = 0.0
    for m in range(5):
        t = phi.derivative_tensor(x, m)
        for _ in range(m):
            t = np.tensordot(t, y, axes=(0, 0))
        total += float(t) / math.factorial(m)
    assert total == pytest.approx(phi(x + y), abs=1e-10, rel=1e-12)


def test_recentered_same_function():
    rng = np.random.default_rng(4)
    phi = PolynomialFunctional.from_tensors(2, {m: rng.normal(size=(2,) * m) for m in range(0, 4)})
    x0 = rng.normal(size=2)
    rc = phi.recentered(x0)
    y = rng.normal(size=(10, 2))
    np.testing.assert_allclose(rc.eval(y), phi.eval(y + x0), rtol=1e-12, atol=1e-12)
