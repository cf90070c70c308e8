"""Brute-force evaluation of ``Z_n`` for discrete measures, and limit fits.

``S_n`` only depends on the occupation counts ``(n_1, ..., n_s)`` of the
support points, so ``Z_n`` is an exact finite sum over compositions of ``n``
weighted by multinomial probabilities.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .functional import PolynomialFunctional
from .measure import DiscreteMeasure

GUARD = 10**8
BLOCK = 1 << 18


class OracleGuardError(RuntimeError):
    """Too many compositions for exact enumeration."""


class ExtrapolationError(ValueError):
    pass


def composition_count(n: int, s: int) -> int:
    return math.comb(n + s - 1, s - 1)


def _all_compositions(m: int, parts: int) -> np.ndarray:
    if parts == 1:
        return np.array([[m]], dtype=np.int64)
    blocks = []
    for first in range(m, -1, -1):
        rest = _all_compositions(m - first, parts - 1)
        blocks.append(np.column_stack([np.full(rest.shape[0], first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def _prefixes(n: int, s: int, block: int, prefix=()):
    """Split compositions into blocks, each identified by a fixed prefix."""
    remaining = n - sum(prefix)
    parts = s - len(prefix)
    if parts == 1 or composition_count(remaining, parts) <= block:
        yield prefix
        return
    for k in range(remaining, -1, -1):
        yield from _prefixes(n, s, block, prefix + (k,))


def _canonical_order(m: DiscreteMeasure) -> np.ndarray:
    return np.lexsort(m.points.T[::-1])


def _enumerate_logsum(m: DiscreteMeasure, n: int, log_term: Callable, guard: int,
                      workers: int = 1, block: int = BLOCK) -> float:
    s = m.size
    count = composition_count(n, s)
    if count > guard:
        raise OracleGuardError(
            f"{count} compositions of n={n} over {s} atoms exceeds the guard {guard}; "
            "use the Monte Carlo estimator (mc_log_Zn / --mc) instead")
    order = _canonical_order(m)
    pts = m.points[order]
    logp = np.log(m.weights[order])
    lfact = gammaln(np.arange(n + 1) + 1.0)
    base = lfact[n]

    def chunk(prefix):
        rest = _all_compositions(n - sum(prefix), s - len(prefix))
        counts = np.column_stack([np.full((rest.shape[0], len(prefix)), prefix, dtype=np.int64), rest]) \
            if prefix else rest
        logw = base - lfact[counts].sum(axis=1) + counts @ logp
        vals = logw + log_term(counts @ pts / n)
        return logsumexp(vals)

    prefixes = list(_prefixes(n, s, block))
    if workers > 1 and len(prefixes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk, prefixes))
    else:
        parts = [chunk(p) for p in prefixes]
    # fixed-order merge keeps the result independent of the worker count
    return float(logsumexp(np.array(parts)))


def exact_log_Zn(m: DiscreteMeasure, phi: PolynomialFunctional, n: int,
                 guard: int = GUARD, workers: int = 1) -> float:
    """``log E[exp(n Phi(S_n / n))]`` by exact enumeration."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if phi.dim != m.dim:
        raise ValueError("functional and measure dimensions differ")
    return _enumerate_logsum(m, n, lambda x: n * phi.eval(x), guard, workers)


def exact_Un(m: DiscreteMeasure, phi: PolynomialFunctional, n: int, lam: float,
             guard: int = GUARD, workers: int = 1) -> float:
    """``exp(-n lambda) Z_n``."""
    return math.exp(exact_log_Zn(m, phi, n, guard, workers) - n * lam)


@dataclass(frozen=True)
class EpsilonConfig:
    """Radius of the Euclidean ball (reduced coordinates) that ``S_n/n`` is restricted to."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def default_for(cls, nu0: DiscreteMeasure) -> "EpsilonConfig":
        """A quarter of the diameter of the support."""
        p = nu0.points
        diam = float(np.max(np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1))) if nu0.size > 1 else 1.0
        return cls(0.25 * diam)


def quadratic_restricted(nu0: DiscreteMeasure, psi2, n: int, eps: EpsilonConfig | float,
                         guard: int = GUARD, workers: int = 1) -> float:
    """``E[exp((n/2) Psi2(S_n/n, S_n/n)); |S_n/n| < eps]`` under the centered measure."""
    psi2 = np.atleast_2d(np.asarray(psi2, dtype=float))
    radius = eps.epsilon if isinstance(eps, EpsilonConfig) else float(eps)

    def log_term(x):
        quad = 0.5 * n * np.einsum("bi,ij,bj->b", x, psi2, x)
        return np.where(np.linalg.norm(x, axis=1) < radius, quad, -np.inf)

    return math.exp(_enumerate_logsum(nu0, n, log_term, guard, workers))


def mc_log_Zn(m: DiscreteMeasure, phi: PolynomialFunctional, n: int, samples: int = 10**5,
              seed: int = 0, batch: int = 50_000):
    """Monte Carlo estimate of ``log Z_n`` and its delta-method standard error."""
    if samples < 10**4:
        raise ValueError("samples must be at least 1e4")
    rng = np.random.default_rng(seed)
    vals = np.empty(samples)
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        counts = rng.multinomial(n, m.weights, size=k)
        vals[done:done + k] = n * phi.eval(counts @ m.points / n)
        done += k
    top = vals.max()
    w = np.exp(vals - top)
    mean = w.mean()
    se = float(w.std(ddof=1) / (math.sqrt(samples) * mean))
    return float(top + math.log(mean)), se


@dataclass
class FitResult:
    limit: float
    coefficients: dict
    residual: float
    powers: tuple
    b1: float | None = None

    def as_dict(self) -> dict:
        return {
            "C2_fit": self.limit,
            "b1": self.b1,
            "residual": self.residual,
            "coefficients": {str(k): v for k, v in self.coefficients.items()},
            "powers_of_inv_sqrt_n": list(self.powers),
        }


def extrapolate(ns: Sequence, values: Sequence, powers: Sequence[int] = (0, 1, 2)) -> FitResult:
    """Least-squares fit ``v_n ~ sum_j b_j n^{-p_j/2}``; ``limit`` is the ``p = 0`` coefficient."""
    ns = np.asarray(ns, dtype=float)
    v = np.asarray(values, dtype=float)
    powers = tuple(int(p) for p in powers)
    if 0 not in powers:
        raise ExtrapolationError("model must contain the constant term (power 0)")
    if ns.size < 3 or ns.size < len(powers):
        raise ExtrapolationError(f"{ns.size} grid points cannot determine {len(powers)} coefficients")
    X = np.column_stack([ns ** (-p / 2.0) for p in powers])
    scale = np.abs(X).max(axis=0)
    if np.linalg.matrix_rank(X / scale) < len(powers):
        raise ExtrapolationError("singular design matrix: degenerate grid")
    coef, *_ = np.linalg.lstsq(X / scale, v, rcond=None)
    coef = coef / scale
    resid = float(np.linalg.norm(X @ coef - v))
    cdict = {p: float(c) for p, c in zip(powers, coef)}
    return FitResult(cdict[0], cdict, resid, powers, cdict.get(1))


@dataclass
class OracleSweep:
    ns: np.ndarray
    log_zn: np.ndarray
    un: np.ndarray
    rn: np.ndarray
    fit: FitResult | None = None
    se: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def rows(self):
        for n, lz, u, r in zip(self.ns, self.log_zn, self.un, self.rn):
            yield int(n), float(lz), float(u), float(r)


def sweep(m: DiscreteMeasure, phi: PolynomialFunctional, lam: float, c0: float,
          ns: Sequence[int], powers=(0, 1, 2), mc_samples: int | None = None,
          seed: int = 0, guard: int = GUARD, workers: int = 1) -> OracleSweep:
    """Compute ``log Z_n``, ``U_n`` and ``R_n = n (U_n - C0)`` on a grid and fit the limit of ``R_n``."""
    ns = np.asarray(sorted(int(n) for n in ns))
    if np.any(np.diff(ns) <= 0):
        raise ValueError("grid values must be distinct")
    log_zn, se = [], []
    for n in ns:
        if mc_samples:
            est, err = mc_log_Zn(m, phi, int(n), mc_samples, seed)
            log_zn.append(est)
            se.append(err)
        else:
            log_zn.append(exact_log_Zn(m, phi, int(n), guard, workers))
    log_zn = np.array(log_zn)
    un = np.exp(log_zn - ns * lam)
    rn = ns * (un - c0)
    fit = extrapolate(ns, rn, powers) if ns.size >= max(3, len(powers)) else None
    return OracleSweep(ns, log_zn, un, rn, fit, np.array(se) if se else None,
                       {"method": "monte_carlo" if mc_samples else "exact"})
