"""Gaussian expectations ``E[exp(Q(Y)/2) P(Y)]`` with ``Q = sum_k a_k y_k^2``.

Multiplying the standard normal density by ``exp(a_k y_k^2 / 2)`` gives,
after normalization, an independent centered normal with variance
``1 / (1 - a_k)`` in each coordinate, so the expectation reduces to
``C0 * sum_alpha c_alpha prod_k E[y_k^alpha_k]`` with univariate Isserlis
moments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 18
PRUNE = 1e-300


class WickError(ArithmeticError):
    pass


class DegreeOverflow(WickError):
    pass


class YPolynomial:
    """Sparse polynomial in ``y_1..y_r`` with complex coefficients.

    Keys are exponent tuples of length ``nvars``.
    """

    __slots__ = ("nvars", "terms", "max_degree")

    def __init__(self, nvars: int, terms=None, max_degree: int = MAX_DEGREE):
        self.nvars = int(nvars)
        self.max_degree = max_degree
        clean = {}
        for k, c in (terms or {}).items():
            k = tuple(int(e) for e in k)
            if len(k) != self.nvars:
                raise ValueError(f"exponent {k} has wrong length for {self.nvars} variables")
            if sum(k) > max_degree:
                raise DegreeOverflow(f"degree {sum(k)} exceeds cap {max_degree}")
            c = complex(c)
            if abs(c) > PRUNE:
                clean[k] = clean.get(k, 0) + c
        self.terms = {k: c for k, c in clean.items() if abs(c) > PRUNE}

    @classmethod
    def constant(cls, nvars: int, value=1.0) -> "YPolynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, k: int) -> "YPolynomial":
        e = [0] * nvars
        e[k] = 1
        return cls(nvars, {tuple(e): 1.0})

    @classmethod
    def linear(cls, coeffs) -> "YPolynomial":
        coeffs = np.asarray(coeffs)
        n = coeffs.shape[0]
        terms = {}
        for k in range(n):
            e = [0] * n
            e[k] = 1
            terms[tuple(e)] = coeffs[k]
        return cls(n, terms)

    @classmethod
    def from_dense(cls, tensor) -> "YPolynomial":
        """``sum_{k_1..k_m} T[k_1..k_m] y_{k_1} ... y_{k_m}`` for a dense order-m tensor."""
        t = np.asarray(tensor)
        m = t.ndim
        n = t.shape[0] if m else 0
        if m == 0:
            raise ValueError("use YPolynomial.constant for order-0 tensors")
        terms: dict = {}
        for idx in np.ndindex(*t.shape):
            c = t[idx]
            if c == 0:
                continue
            e = [0] * n
            for k in idx:
                e[k] += 1
            key = tuple(e)
            terms[key] = terms.get(key, 0) + c
        return cls(n, terms)

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def copy(self) -> "YPolynomial":
        p = YPolynomial(self.nvars, max_degree=self.max_degree)
        p.terms = dict(self.terms)
        return p

    def _check(self, other: "YPolynomial"):
        if other.nvars != self.nvars:
            raise ValueError("polynomials in different numbers of variables")

    def __add__(self, other):
        if not isinstance(other, YPolynomial):
            other = YPolynomial.constant(self.nvars, other)
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return YPolynomial(self.nvars, out, max(self.max_degree, other.max_degree))

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other if isinstance(other, YPolynomial) else -complex(other))

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "YPolynomial":
        c = complex(c)
        if c == 0:
            return YPolynomial(self.nvars, max_degree=self.max_degree)
        return YPolynomial(self.nvars, {k: v * c for k, v in self.terms.items()}, self.max_degree)

    def __mul__(self, other):
        if not isinstance(other, YPolynomial):
            return self.scale(other)
        self._check(other)
        cap = max(self.max_degree, other.max_degree)
        if self.degree + other.degree > cap and self.terms and other.terms:
            raise DegreeOverflow(f"product degree {self.degree + other.degree} exceeds cap {cap}")
        out: dict = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + c1 * c2
        return YPolynomial(self.nvars, out, cap)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = YPolynomial.constant(self.nvars, 1.0)
        out.max_degree = self.max_degree
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __call__(self, y):
        """Evaluate at points ``y`` of shape ``(..., nvars)``."""
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape[:-1], dtype=complex)
        for k, c in self.terms.items():
            term = np.full(y.shape[:-1], c, dtype=complex)
            for j, e in enumerate(k):
                if e:
                    term = term * y[..., j] ** e
            out = out + term
        return out

    def flip_sign(self, k: int) -> "YPolynomial":
        """Substitute ``y_k -> -y_k``."""
        return YPolynomial(self.nvars, {e: c * (-1) ** e[k] for e, c in self.terms.items()},
                           self.max_degree)

    def __repr__(self):
        return f"YPolynomial(nvars={self.nvars}, terms={len(self.terms)}, degree={self.degree})"


def gaussian_moment(m: int, var: float) -> float:
    """``E[y^m]`` for ``y ~ N(0, var)``: ``(m-1)!! var^{m/2}`` for even ``m``, else 0."""
    if m < 0:
        raise ValueError("negative moment order")
    if m % 2:
        return 0.0
    dfact = math.prod(range(m - 1, 0, -2)) if m > 1 else 1
    return dfact * var ** (m // 2)


@dataclass(frozen=True)
class GaussianWeight:
    variances: np.ndarray
    c0: float

    @classmethod
    def from_eigenvalues(cls, a) -> "GaussianWeight":
        a = np.asarray(a, dtype=float)
        if np.any(a >= 1):
            raise WickError("eigenvalue >= 1: Gaussian weight is not integrable")
        var = 1.0 / (1.0 - a)
        return cls(var, float(np.exp(-0.5 * np.sum(np.log1p(-a)))))


def gaussian_expect(p: YPolynomial, w: GaussianWeight, imag_tol: float = 1e-9) -> float:
    """``E[exp(Q(Y)/2) P(Y)]`` for ``Y`` standard normal in ``nvars`` dimensions.

    Returns the real part. Raises :class:`WickError` if the imaginary part is
    not negligible, which would mean square roots of negative eigenvalues
    failed to pair up.
    """
    if p.nvars != len(w.variances):
        raise ValueError("polynomial and weight dimensions differ")
    re_parts, im_parts = [], []
    var = [float(v) for v in w.variances]
    for key in sorted(p.terms):
        if any(e % 2 for e in key):
            continue
        mom = 1.0
        for e, v in zip(key, var):
            if e:
                mom *= gaussian_moment(e, v)
        c = p.terms[key] * mom
        re_parts.append(c.real)
        im_parts.append(c.imag)
    re = w.c0 * math.fsum(re_parts)
    im = w.c0 * math.fsum(im_parts)
    if abs(im) > imag_tol * (1.0 + abs(re)):
        raise WickError(f"imaginary residue {im:.3e} in Gaussian expectation (real part {re:.6g})")
    return re


def multi_indices(nvars: int, degree: int):
    """All exponent tuples of the given total degree, in lexicographic order."""
    for combo in itertools.combinations_with_replacement(range(nvars), degree):
        e = [0] * nvars
        for k in combo:
            e[k] += 1
        yield tuple(e)
