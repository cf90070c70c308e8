import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import torus
from laplace_asymptotics.measure import normalize
from laplace_asymptotics.pipeline import analyze
from laplace_asymptotics.spectral import (
    CriticalityError,
    SpectralError,
    Spectrum,
    eigensystem,
    leading_constant,
    reconstruct,
)
from laplace_asymptotics.wick import GaussianWeight, YPolynomial, gaussian_expect


def test_one_dimensional_identity_geometry():
    spectrum = eigensystem([[1.0]], [[0.5]])
    assert spectrum.a[0] == 0.5 and spectrum.e[0, 0] == 1.0 and spectrum.f[0, 0] == 1.0
    assert spectrum.c0 == pytest.approx(np.sqrt(2), abs=1e-15)


def test_zero_hessian():
    spectrum = eigensystem(np.diag([1.0, 2.0, 3.0]), np.zeros((3, 3)))
    np.testing.assert_array_equal(spectrum.a, 0.0)
    assert spectrum.c0 == 1.0


@pytest.mark.parametrize("a,c0", [((0.0, 0.0), 1.0), ((0.5,), np.sqrt(2)), ((0.5, -1.0), 1.0)])
def test_leading_constant(a, c0):
    spectrum = Spectrum(np.array(a), np.eye(len(a)), np.eye(len(a)))
    assert leading_constant(spectrum) == pytest.approx(c0, abs=1e-15)


def test_criticality_names_index():
    spectrum = Spectrum(np.array([0.2, 1.0 - 1e-8]), np.eye(2), np.eye(2))
    with pytest.raises(CriticalityError) as info:
        leading_constant(spectrum)
    assert info.value.index == 1


def test_not_positive_definite():
    with pytest.raises(SpectralError):
        eigensystem([[1.0, 0.0], [0.0, 0.0]], np.eye(2))


def test_torus_eigenvalue_doubling():
    m, phi, _ = torus()
    res = analyze(m, phi)
    nonzero = np.sort(res.spectrum.a[np.abs(res.spectrum.a) > 1e-8])
    np.testing.assert_allclose(nonzero, [-0.2, 0.1, 0.4], atol=1e-10)


def random_spd(rng, r):
    a = rng.normal(size=(r, r))
    return a @ a.T + 0.5 * np.eye(r)


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_biorthogonality_and_reconstruction(seed, r):
    rng = np.random.default_rng(seed)
    gamma = random_spd(rng, r)
    psi2 = rng.normal(size=(r, r))
    psi2 = 0.1 * (psi2 + psi2.T)
    spectrum = eigensystem(gamma, psi2, check_criticality=False)
    np.testing.assert_allclose(spectrum.e @ gamma @ spectrum.e.T, np.eye(r), atol=1e-10)
    np.testing.assert_allclose(spectrum.e @ spectrum.f.T, np.eye(r), atol=1e-10)
    np.testing.assert_allclose(reconstruct(spectrum), psi2, atol=1e-10)
    assert np.all(np.diff(spectrum.a) <= 0)


@given(st.integers(0, 10_000))
def test_leading_constant_equals_gaussian_normalization(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-2, 0.9, size=int(rng.integers(1, 6)))
    spectrum = Spectrum(a, np.eye(a.size), np.eye(a.size))
    w = GaussianWeight.from_eigenvalues(a)
    assert gaussian_expect(YPolynomial.constant(a.size), w) == pytest.approx(leading_constant(spectrum), rel=1e-12)


def test_spectrum_invariant_under_support_permutation():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(5, 2))
    w = rng.uniform(0.2, 1, size=5)
    perm = rng.permutation(5)
    psi2 = np.array([[0.2, 0.05], [0.05, -0.1]])
    specs = []
    for p in (np.arange(5), perm):
        m = normalize(pts[p], w[p])
        specs.append(eigensystem(m.covariance(), psi2))
    np.testing.assert_allclose(specs[0].a, specs[1].a, atol=1e-10)
