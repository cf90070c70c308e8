"""Eigensystem of the Hessian at the optimum in the covariance geometry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CRIT_TOL = 1e-6


class SpectralError(ValueError):
    pass


class CriticalityError(SpectralError):
    """An eigenvalue reached 1 (within ``crit_tol``)."""

    def __init__(self, message, index, value):
        super().__init__(message)
        self.index = index
        self.value = value


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues ``a`` (descending), dual basis ``e`` and primal basis ``f``.

    Row ``k`` of ``e`` is the functional ``e_k``; row ``k`` of ``f`` is the
    vector ``f_k``. ``e @ gamma @ e.T = I`` and ``e @ f.T = I``.
    """

    a: np.ndarray
    e: np.ndarray
    f: np.ndarray
    c0: float = float("nan")

    @property
    def r(self) -> int:
        return self.a.shape[0]

    def sqrt_a(self) -> np.ndarray:
        """Principal square roots, imaginary for negative eigenvalues."""
        return np.sqrt(self.a.astype(complex))


def _sym_sqrt(gamma: np.ndarray):
    w, v = np.linalg.eigh(gamma)
    if w.size and w.min() <= 1e-10 * max(w.max(), 0.0):
        raise SpectralError(f"covariance is not positive definite (eigenvalues {w})")
    if w.size and w.max() <= 0:
        raise SpectralError("covariance is not positive definite")
    root = (v * np.sqrt(w)) @ v.T
    inv_root = (v / np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T), 0.5 * (inv_root + inv_root.T)


def eigensystem(gamma, psi2, crit_tol: float = CRIT_TOL, check_criticality: bool = True) -> Spectrum:
    """Solve ``gamma^{1/2} psi2 gamma^{1/2} v = a v``.

    Sign convention: the first entry of each ``v_k`` with magnitude above
    ``1e-12`` is positive. With ``check_criticality`` the leading constant is
    computed and :class:`CriticalityError` is raised if ``max a >= 1 - crit_tol``.
    """
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    psi2 = np.atleast_2d(np.asarray(psi2, dtype=float))
    r = gamma.shape[0]
    if r == 0 or gamma.size == 0:
        empty = np.zeros((0, 0))
        return Spectrum(np.zeros(0), empty, empty, 1.0)
    if not np.allclose(gamma, gamma.T, atol=1e-12):
        raise SpectralError("covariance is not symmetric")
    g_half, g_inv_half = _sym_sqrt(gamma)
    sandwich = g_half @ (0.5 * (psi2 + psi2.T)) @ g_half
    a, v = np.linalg.eigh(0.5 * (sandwich + sandwich.T))
    v = v.T.copy()
    for k in range(r):
        j = int(np.argmax(np.abs(v[k]) > 1e-12))
        if v[k, j] < 0:
            v[k] = -v[k]
    order = sorted(range(r), key=lambda k: (-a[k], tuple(-v[k])))
    a, v = a[order], v[order]
    e = v @ g_inv_half
    f = v @ g_half
    spectrum = Spectrum(a, e, f)
    if check_criticality:
        spectrum = Spectrum(a, e, f, leading_constant(spectrum, crit_tol))
    return spectrum


def leading_constant(spectrum: Spectrum, crit_tol: float = CRIT_TOL) -> float:
    """``prod_k (1 - a_k)^{-1/2}``, evaluated in log space."""
    a = np.asarray(spectrum.a, dtype=float)
    bad = np.nonzero(a >= 1.0 - crit_tol)[0]
    if bad.size:
        k = int(bad[0])
        raise CriticalityError(
            f"eigenvalue a[{k}] = {float(a[k])!r} is not below 1 - {crit_tol:g}; "
            "the optimum is critical", k, float(a[k]))
    return float(np.exp(-0.5 * np.sum(np.log1p(-a))))


def reconstruct(spectrum: Spectrum) -> np.ndarray:
    """``sum_k a_k e_k e_k^T``, which equals the Hessian."""
    return (spectrum.e.T * spectrum.a) @ spectrum.e
