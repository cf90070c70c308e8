import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import curie_weiss, random_functional, random_measure
from laplace_asymptotics import PolynomialFunctional, normalize
from laplace_asymptotics.measure import affine_reduce, log_mgf
from laplace_asymptotics.oracle import exact_log_Zn
from laplace_asymptotics.variational import (
    EntropyDivergence,
    UniquenessViolation,
    VariationalError,
    analyze_optimum,
    entropy,
    find_maximizer,
)


def binary_entropy(x):
    return 0.5 * (1 + x) * np.log1p(x) + 0.5 * (1 - x) * np.log1p(-x)


def test_entropy_at_mean_is_zero():
    m = normalize([[-1.0], [0.0], [2.0]], [0.5, 0.3, 0.2])
    h, phi = entropy(m, m.mean())
    assert h == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(phi, 0.0, atol=1e-12)


def test_entropy_two_point_closed_form():
    m = normalize([[-1.0], [1.0]], [0.5, 0.5])
    h, phi = entropy(m, [0.5])
    assert h == pytest.approx(0.13081204, abs=1e-8)
    assert h == pytest.approx(binary_entropy(0.5), abs=1e-12)
    assert phi[0] == pytest.approx(np.arctanh(0.5), abs=1e-10)


@pytest.mark.parametrize("x", [[1.0], [-1.0], [1.5]])
def test_entropy_boundary_or_outside_diverges(x):
    m = normalize([[-1.0], [1.0]], [0.5, 0.5])
    with pytest.raises(EntropyDivergence):
        entropy(m, x)


def test_entropy_off_affine_hull():
    x = np.array([-1.0, 0.0, 1.0])
    m = normalize(np.column_stack([x, x]), [1, 1, 1])
    with pytest.raises(EntropyDivergence):
        entropy(m, [0.0, 0.5])


def test_zero_functional_maximizer_is_mean():
    m = normalize([[-1.0], [0.0], [2.0]], [0.5, 0.3, 0.2])
    ctx = analyze_optimum(m, PolynomialFunctional.zero(1))
    np.testing.assert_allclose(ctx.x_star_ambient, m.mean(), atol=1e-12)
    np.testing.assert_allclose(ctx.phi_star_ambient, 0.0, atol=1e-12)
    assert ctx.lam == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(ctx.gamma, m.covariance(), atol=1e-12)


def test_curie_weiss_subcritical():
    m, phi = curie_weiss(0.5)
    ctx = analyze_optimum(m, phi)
    assert abs(ctx.x_star_ambient[0]) < 1e-12
    assert ctx.lam == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(ctx.gamma, [[1.0]], atol=1e-12)
    np.testing.assert_allclose(sorted(ctx.nu0.points.ravel()), [-1.0, 1.0], atol=1e-12)
    # dense grid scan of Phi - h agrees
    xs = np.linspace(-0.99, 0.99, 397)
    vals = [phi(x) - binary_entropy(x) for x in xs]
    assert max(vals) <= ctx.lam + 1e-12


@pytest.mark.parametrize("c", [0.3, -1.2, 2.0])
def test_linear_functional(c):
    m = normalize([[-1.0], [1.0]], [0.5, 0.5])
    phi = PolynomialFunctional(1, {1: np.array([c])})
    ctx = analyze_optimum(m, phi)
    assert ctx.x_star_ambient[0] == pytest.approx(np.tanh(c), abs=1e-10)
    assert ctx.lam == pytest.approx(np.log(np.cosh(c)), abs=1e-10)
    assert ctx.gamma[0, 0] == pytest.approx(1 - np.tanh(c) ** 2, abs=1e-10)


def test_symmetric_double_well_violates_uniqueness():
    m, phi = curie_weiss(1.5)
    with pytest.raises(UniquenessViolation) as info:
        analyze_optimum(m, phi)
    xs = sorted(r.x[0] for r in info.value.roots[:2])
    assert xs[0] == pytest.approx(-xs[1], abs=1e-8)


def test_maximizer_is_deterministic():
    rng = np.random.default_rng(5)
    m = random_measure(rng, s=4, d=2)
    phi = random_functional(rng, 2)
    a = analyze_optimum(m, phi, seed=3)
    b = analyze_optimum(m, phi, seed=3)
    np.testing.assert_array_equal(a.x_star, b.x_star)


@given(st.integers(0, 10_000))
def test_context_invariants(seed):
    rng = np.random.default_rng(seed)
    m = random_measure(rng)
    phi = random_functional(rng, m.dim, scale=0.05)
    ctx = analyze_optimum(m, phi)
    red, frame = affine_reduce(m)
    _, mean, _ = log_mgf(red, ctx.phi_star)
    assert np.linalg.norm(mean - ctx.x_star) <= 1e-9
    np.testing.assert_allclose(ctx.nu0.mean(), 0.0, atol=1e-12)
    np.testing.assert_allclose(ctx.gamma, ctx.gamma.T, atol=1e-12)
    ev = np.linalg.eigvalsh(ctx.gamma)
    assert ev.min() > 1e-10 * ev.max()
    # global maximum over random interior points
    w = rng.dirichlet(np.ones(red.size), size=200)
    for x in w @ red.points:
        h, _ = entropy(red, x)
        assert ctx.functional(x) - h <= ctx.lam + 1e-9


@given(st.integers(0, 10_000))
def test_entropy_duality(seed):
    rng = np.random.default_rng(seed)
    m = normalize([[-1.0], [0.0], [2.0]], rng.uniform(0.2, 1.0, size=3))
    phi = rng.normal()
    lam = float(log_mgf(m, np.array([phi]))[0])
    xs = np.linspace(-0.999, 1.999, 3001)
    vals = [phi * x - entropy(m, [x])[0] for x in xs[::50]]
    assert max(vals) <= lam + 1e-10
    _, x_opt, _ = log_mgf(m, np.array([phi]))
    h, _ = entropy(m, x_opt)
    assert phi * x_opt[0] - h == pytest.approx(lam, abs=1e-8)


def test_find_maximizer_zero_dim():
    m = normalize([[3.0]], [1.0])
    red, _ = affine_reduce(m)
    res = find_maximizer(red, PolynomialFunctional(0, {0: np.array(1.5)}))
    assert res.lam == 1.5


def test_free_energy_approaches_lambda():
    m, phi = curie_weiss(0.5)
    ctx = analyze_optimum(m, phi)
    ns = [25, 50, 100, 200, 400, 800]
    gaps = [abs(exact_log_Zn(m, phi, n) / n - ctx.lam) for n in ns]
    assert all(g2 <= g1 + 1e-9 for g1, g2 in zip(gaps, gaps[1:]))
    assert all(g <= 2 * np.log(n) / n for g, n in zip(gaps, ns))


def test_boundary_maximizer_rejected():
    # a steep linear tilt pushes the optimum onto a vertex of the hull
    m = normalize([[-1.0], [1.0]], [0.5, 0.5])
    phi = PolynomialFunctional(1, {1: np.array([40.0])})
    with pytest.raises(VariationalError):
        analyze_optimum(m, phi)


def test_critical_peak_is_not_a_tie():
    from laplace_asymptotics.spectral import CriticalityError, eigensystem
    m, phi = curie_weiss(1.0)
    ctx = analyze_optimum(m, phi)
    assert abs(ctx.x_star[0]) < 1e-3
    with pytest.raises(CriticalityError):
        eigensystem(ctx.gamma, ctx.functional.hessian(ctx.x_star))
