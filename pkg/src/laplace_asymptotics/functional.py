"""Polynomial functionals stored as symmetric coefficient tensors.

``Phi(x) = sum_m T_m[x, ..., x]`` with ``T_m`` fully symmetric of order ``m``.
Derivatives are closed-form contractions, so the Taylor expansion around any
point terminates exactly at the degree.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .measure import ReducedFrame

MAX_DEGREE = 6
MAX_DERIVATIVE = 4


class FunctionalError(ValueError):
    pass


def symmetrize(t) -> np.ndarray:
    """Average a tensor over index permutations.

    Each permutation orbit receives one value, so the result is symmetric to
    exact equality rather than to rounding.
    """
    t = np.asarray(t, dtype=float)
    m = t.ndim
    if m <= 1:
        return t.copy()
    out = np.empty_like(t)
    for idx in itertools.combinations_with_replacement(range(t.shape[0]), m):
        orbit = set(itertools.permutations(idx))
        val = math.fsum(t[p] for p in orbit) / len(orbit)
        for p in orbit:
            out[p] = val
    return out


def _is_symmetric(t: np.ndarray) -> bool:
    return all(np.array_equal(t, np.transpose(t, p)) for p in itertools.permutations(range(t.ndim)))


def _contract_front(t: np.ndarray, x: np.ndarray, times: int) -> np.ndarray:
    for _ in range(times):
        t = np.tensordot(x, t, axes=(0, 0))
    return t


@dataclass(frozen=True)
class PolynomialFunctional:
    """Polynomial ``R^d -> R`` given by symmetric tensors ``tensors[m]`` of order ``m``.

    Parameters
    ----------
    dim : int
        Dimension ``d`` of the domain.
    tensors : dict[int, ndarray]
        Map from order to a symmetric tensor of shape ``(dim,) * order``.
        Missing orders are zero.
    """

    dim: int
    tensors: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for m, t in self.tensors.items():
            m = int(m)
            t = np.asarray(t, dtype=float)
            if m < 0 or m > MAX_DEGREE:
                raise FunctionalError(f"tensor order {m} outside 0..{MAX_DEGREE}")
            if t.shape != (self.dim,) * m:
                raise FunctionalError(f"order-{m} tensor has shape {t.shape}, expected {(self.dim,) * m}")
            if not _is_symmetric(t):
                raise FunctionalError(f"order-{m} tensor is not symmetric")
            if np.any(t != 0):
                t = t.copy()
                t.setflags(write=False)
                clean[m] = t
        object.__setattr__(self, "tensors", clean)

    @classmethod
    def zero(cls, dim: int) -> "PolynomialFunctional":
        return cls(dim, {})

    @classmethod
    def from_tensors(cls, dim: int, tensors: dict) -> "PolynomialFunctional":
        """Like the constructor but symmetrizes its input first."""
        return cls(dim, {m: symmetrize(np.asarray(t, dtype=float).reshape((dim,) * int(m)))
                         for m, t in tensors.items()})

    @property
    def degree(self) -> int:
        return max(self.tensors, default=0)

    def tensor(self, m: int) -> np.ndarray:
        t = self.tensors.get(m)
        return np.zeros((self.dim,) * m) if t is None else t

    def __call__(self, x) -> float | np.ndarray:
        return self.eval(x)

    def eval(self, x):
        """Value at ``x``; ``x`` may carry a leading batch axis."""
        x = np.asarray(x, dtype=float)
        batched = x.ndim == 2
        xb = x if batched else x.reshape(1, self.dim)
        out = np.zeros(xb.shape[0])
        for m, t in self.tensors.items():
            if m == 0:
                out += float(t)
                continue
            v = np.broadcast_to(t, (xb.shape[0],) + t.shape)
            for _ in range(m):
                v = np.einsum("ni,ni...->n...", xb, v)
            out += v
        return out if batched else float(out[0])

    def derivative_tensor(self, x, order: int) -> np.ndarray:
        """Exact ``order``-th Frechet derivative at ``x`` (order <= 4)."""
        if order > MAX_DERIVATIVE or order < 0:
            raise FunctionalError(f"derivative order {order} not in 0..{MAX_DERIVATIVE}")
        return self._derivative(x, order)

    def _derivative(self, x, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        out = np.zeros((self.dim,) * order)
        for m, t in self.tensors.items():
            if m < order:
                continue
            coef = math.factorial(m) / math.factorial(m - order)
            out = out + coef * _contract_front(t, x, m - order)
        return out

    def gradient(self, x) -> np.ndarray:
        return self._derivative(x, 1)

    def hessian(self, x) -> np.ndarray:
        return self._derivative(x, 2)

    def recentered(self, x0) -> "PolynomialFunctional":
        """Same function written in the variable ``y = x - x0``."""
        x0 = np.asarray(x0, dtype=float).reshape(self.dim)
        deg = self.degree
        return PolynomialFunctional(
            self.dim,
            {j: symmetrize(self._derivative(x0, j) / math.factorial(j)) for j in range(deg + 1)},
        )


@dataclass(frozen=True)
class FrameFunctional(PolynomialFunctional):
    """A functional pulled back to the coordinates of a :class:`ReducedFrame`."""

    frame: ReducedFrame | None = None


def pullback(phi: PolynomialFunctional, frame: ReducedFrame) -> FrameFunctional:
    """Return ``z -> phi(frame.offset + frame.basis.T @ z)``."""
    if frame.ambient_dim != phi.dim:
        raise FunctionalError("frame and functional dimensions differ")
    B = frame.basis
    tensors = {}
    for j in range(phi.degree + 1):
        t = phi._derivative(frame.offset, j) / math.factorial(j)
        for _ in range(j):
            # contract the leading ambient axis with the basis, rolling it to the back
            t = np.moveaxis(np.tensordot(B, t, axes=(1, 0)), 0, -1)
        tensors[j] = symmetrize(t)
    return FrameFunctional(frame.r, tensors, frame=frame)
