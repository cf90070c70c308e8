"""Coefficients of the large-n expansion of ``U_n = exp(-n lambda) Z_n``.

``U_n = C0 + C2 / n + o(1/n)``. ``C2`` is assembled from named blocks:

* ``T1_quadratic_block`` -- correction from the quadratic part alone,
* ``T2_psi4`` -- quartic derivative,
* ``L1_psi3_squared`` .. ``L7`` -- cubic derivative interacting with the
  fluctuations of the tilted measure.

All blocks are Gaussian expectations of polynomials in the eigencoordinates
``y_k = e_k(Y)`` and are evaluated exactly by :mod:`.wick`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measure import dual_moment
from .spectral import Spectrum
from .variational import AnalysisContext
from .wick import GaussianWeight, YPolynomial, gaussian_expect, multi_indices

BREAKDOWN_KEYS = (
    "T1_quadratic_block",
    "T2_psi4",
    "L1_psi3_squared",
    "L2_psi3_diag",
    "L3",
    "L4",
    "L5",
    "L6",
    "L7",
)

# Weight of E[w1 w2 w3^2 Psi3(X1, X2, X3)]: three choices of the doubled
# index times the 1/2 from the order-4 Taylor coefficient 12/4!, times 1/3!.
L7_WEIGHT = 0.25

MAX_SERIES_ORDER = 3


class ExpansionError(ValueError):
    pass


def _multinomial(alpha) -> float:
    return math.factorial(sum(alpha)) / math.prod(math.factorial(a) for a in alpha)


def _contract_all(t: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``t[f_{k1}, ..., f_{km}]`` for rows ``f_k`` of ``basis``."""
    for _ in range(t.ndim):
        t = np.moveaxis(np.tensordot(basis, t, axes=(1, 0)), 0, -1)
    return t


def symmetric_tensor_poly(t: np.ndarray) -> YPolynomial:
    """``t[y, ..., y]`` for a symmetric tensor ``t`` in the eigencoordinates."""
    m, r = t.ndim, t.shape[0]
    terms = {}
    for alpha in multi_indices(r, m):
        idx = tuple(k for k, e in enumerate(alpha) for _ in range(e))
        terms[alpha] = _multinomial(alpha) * t[idx]
    return YPolynomial(r, terms)


@dataclass
class MomentPolynomialCache:
    """``A[m](y) = E_nu0[(sum_k sqrt(a_k) e_k(X) y_k)^m]`` plus the cubic and
    quartic derivative forms ``W3(y) = Psi3(Y,Y,Y)``, ``W4(y) = Psi4(Y,Y,Y,Y)``.
    """

    A: dict
    W3: YPolynomial
    W4: YPolynomial
    psi3: np.ndarray
    psi4: np.ndarray
    max_m: int

    def Q(self) -> YPolynomial:
        return self.A[2]


def moment_polynomial(ctx: AnalysisContext, spectrum: Spectrum, m: int) -> YPolynomial:
    r = spectrum.r
    sa = spectrum.sqrt_a()
    terms = {}
    for alpha in multi_indices(r, m):
        duals = [spectrum.e[k] for k, e in enumerate(alpha) for _ in range(e)]
        mom = dual_moment(ctx.nu0, duals)
        if mom == 0:
            continue
        terms[alpha] = _multinomial(alpha) * np.prod(sa ** np.array(alpha)) * mom
    return YPolynomial(r, terms)


def build_moment_cache(ctx: AnalysisContext, spectrum: Spectrum, max_m: int = 4) -> MomentPolynomialCache:
    """Precompute the moment polynomials ``A[2..max_m]`` and ``W3``, ``W4``."""
    if max_m < 2:
        raise ExpansionError("max_m must be at least 2")
    A = {m: moment_polynomial(ctx, spectrum, m) for m in range(2, max_m + 1)}
    phi = ctx.functional
    psi3 = phi._derivative(ctx.x_star, 3)
    psi4 = phi._derivative(ctx.x_star, 4)
    r = spectrum.r
    if r:
        W3 = symmetric_tensor_poly(_contract_all(psi3, spectrum.f))
        W4 = symmetric_tensor_poly(_contract_all(psi4, spectrum.f))
    else:
        W3 = W4 = YPolynomial(0)
    return MomentPolynomialCache(A, W3, W4, psi3, psi4, max_m)


@dataclass
class ExpansionReport:
    c0: float
    c2_total: float
    c2_breakdown: dict
    flags: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "C0": self.c0,
            "C2": {"total": self.c2_total, "breakdown": dict(self.c2_breakdown)},
            "flags": dict(self.flags),
        }


def quadratic_block(cache: MomentPolynomialCache, weight: GaussianWeight) -> float:
    """``E[e^{Q/2}(-Q^2/8 + (A3/3!)^2/2 + A4/4!)]``."""
    Q = cache.A[2]
    poly = Q * Q * (-1.0 / 8) + (cache.A[3] * cache.A[3]) * (1.0 / 72) + cache.A[4] * (1.0 / 24)
    return gaussian_expect(poly, weight)


def c2_coefficient(cache: MomentPolynomialCache, spectrum: Spectrum, ctx: AnalysisContext) -> ExpansionReport:
    """The ``1/n`` coefficient of ``U_n`` with its per-block breakdown."""
    if cache.max_m < 4:
        raise ExpansionError("cache must hold moment polynomials up to order 4")
    r = spectrum.r
    weight = GaussianWeight.from_eigenvalues(spectrum.a)
    c0 = weight.c0
    if r == 0:
        bd = {k: 0.0 for k in BREAKDOWN_KEYS}
        return ExpansionReport(c0, 0.0, bd, {})

    nu0 = ctx.nu0
    q, z = nu0.weights, nu0.points
    gamma = ctx.gamma
    psi3 = cache.psi3
    sa = spectrum.sqrt_a()
    e, f = spectrum.e, spectrum.f
    A3 = cache.A[3]

    bd = {}
    bd["T1_quadratic_block"] = quadratic_block(cache, weight)
    bd["T2_psi4"] = gaussian_expect(cache.W4, weight) / 24.0
    bd["L1_psi3_squared"] = gaussian_expect(cache.W3 * cache.W3, weight) / 72.0

    diag = float(np.einsum("ijk,ni,nj,nk,n->", psi3, z, z, z, q))
    bd["L2_psi3_diag"] = c0 * diag / 6.0

    # g . x = E[Psi3(x, X2, X2)]
    g = np.einsum("ijk,jk->i", psi3, gamma)
    b1 = YPolynomial.linear(sa * np.array([dual_moment(nu0, [e[k], g]) for k in range(r)]))
    bd["L3"] = gaussian_expect(A3 * b1, weight) / 12.0

    # third moment contracted with one dual: M3[l] = E[e_l(X) X X^T]
    ez = z @ e.T  # (s, r): e_k(z_i)
    M3 = np.einsum("n,nl,ni,nj->lij", q, ez, z, z)
    l4 = np.einsum("ijm,ki,lmj->kl", psi3, f, M3)
    bd["L4"] = 0.5 * gaussian_expect(YPolynomial.from_dense(np.outer(sa, sa) * l4), weight)

    l5 = np.array([[dual_moment(nu0, [e[k], e[l], g]) for l in range(r)] for k in range(r)])
    bd["L5"] = 0.25 * gaussian_expect(YPolynomial.from_dense(np.outer(sa, sa) * l5), weight)

    W3f = _contract_all(psi3, f)
    sa3 = np.einsum("k,l,m->klm", sa, sa, sa)
    D3 = YPolynomial.from_dense(sa3 * W3f)
    bd["L6"] = gaussian_expect(A3 * D3, weight) / 36.0

    # E[e_m(X) e_p(X) X] for all m, p
    V = np.einsum("n,nm,np,ni->mpi", q, ez, ez, z)
    l7 = np.einsum("ijc,ki,lj,mpc->klmp", psi3, f, f, V)
    sa4 = np.einsum("klm,p->klmp", sa3, sa)
    bd["L7"] = L7_WEIGHT * gaussian_expect(YPolynomial.from_dense(sa4 * l7), weight)

    bd = {k: float(bd[k]) for k in BREAKDOWN_KEYS}
    total = math.fsum(bd.values())
    if not all(np.isfinite(v) for v in bd.values()):
        raise ExpansionError(f"non-finite C2 block: {bd}")
    return ExpansionReport(c0, total, bd, {})


# --- truncated power series in t = n^{-1/2} with polynomial coefficients ---

def _series_mul(a: list, b: list, order: int, nvars: int) -> list:
    out = [YPolynomial(nvars) for _ in range(order + 1)]
    for i, ai in enumerate(a):
        if ai.is_zero():
            continue
        for j, bj in enumerate(b):
            if i + j > order:
                break
            if bj.is_zero():
                continue
            out[i + j] = out[i + j] + ai * bj
    return out


def _series_add(a: list, b: list, scale=1.0) -> list:
    return [x + y.scale(scale) for x, y in zip(a, b)]


@dataclass
class PowerSeries:
    """``sum_m coefficients[m] * t^m`` with ``t = n^{-1/2}``."""

    coefficients: np.ndarray
    order: int

    def __call__(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        t = n ** -0.5
        return sum(c * t ** m for m, c in enumerate(self.coefficients))

    def as_dict(self) -> dict:
        return {"order": self.order, "coefficients": [float(c) for c in self.coefficients]}


def quadratic_series(cache: MomentPolynomialCache, spectrum: Spectrum, N: int) -> PowerSeries:
    """Expansion of ``E[exp((n/2) Psi2(S_n/n, S_n/n)); |S_n/n| < eps]`` to ``n^{-N}``.

    With ``Z(t) = sum_{m>=2} t^m A_m / m!`` the exponent
    ``S(t) = t^{-2} log(1 + Z(t)) - Q/2`` is expanded as a formal series and
    ``E[e^{Q/2} exp(S(t))]`` is truncated at ``t^{2N}`` before taking
    Gaussian expectations.
    """
    if N < 0 or N > MAX_SERIES_ORDER:
        raise ExpansionError(f"series order N={N} not in 0..{MAX_SERIES_ORDER}")
    weight = GaussianWeight.from_eigenvalues(spectrum.a)
    if N == 0:
        return PowerSeries(np.array([weight.c0]), 0)
    need = 2 * N + 2
    if cache.max_m < need:
        raise ExpansionError(f"cache holds A_m up to {cache.max_m}, need {need}")
    r = spectrum.r
    K = 2 * N  # order kept in t
    L = need  # order kept in t before dividing by t^2

    def zero():
        return [YPolynomial(r) for _ in range(L + 1)]

    Z = zero()
    for m in range(2, L + 1):
        Z[m] = cache.A[m].scale(1.0 / math.factorial(m))
    log1pZ = zero()
    power = [YPolynomial.constant(r, 1.0)] + [YPolynomial(r) for _ in range(L)]
    for j in range(1, N + 2):
        power = _series_mul(power, Z, L, r)
        log1pZ = _series_add(log1pZ, power, (-1) ** (j - 1) / j)

    S = [log1pZ[i + 2] for i in range(K + 1)]
    S[0] = S[0] - cache.A[2].scale(0.5)

    E = [YPolynomial.constant(r, 1.0)] + [YPolynomial(r) for _ in range(K)]
    term = [YPolynomial.constant(r, 1.0)] + [YPolynomial(r) for _ in range(K)]
    for ell in range(1, K + 1):
        term = _series_mul(term, S, K, r)
        E = _series_add(E, term, 1.0 / math.factorial(ell))

    coeffs = np.array([gaussian_expect(E[m], weight) for m in range(K + 1)])
    return PowerSeries(coeffs, N)
