"""Finite-support probability measures on R^d.

Everything here is exact up to floating point rounding: the log moment
generating function is a finite log-sum-exp, tilting is a reweighting, and
moments are finite weighted sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

WEIGHT_TOL = 1e-12
POINT_TOL = 1e-12
HULL_RTOL = 1e-10


class MeasureError(ValueError):
    """Invalid input for a discrete measure."""


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure with finitely many atoms.

    Parameters
    ----------
    points : ndarray of shape (s, d)
        Support points.
    weights : ndarray of shape (s,)
        Strictly positive probabilities summing to one.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0]:
            raise MeasureError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if w.size == 0:
            raise MeasureError("empty support")
        if np.any(w <= 0):
            raise MeasureError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise MeasureError(f"weights sum to {w.sum()!r}, not 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def covariance(self) -> np.ndarray:
        """Centered second moment matrix."""
        c = self.points - self.mean()
        cov = (c * self.weights[:, None]).T @ c
        return 0.5 * (cov + cov.T)

    def second_moment(self) -> np.ndarray:
        """Uncentered second moment matrix E[X X^T]."""
        m = (self.points * self.weights[:, None]).T @ self.points
        return 0.5 * (m + m.T)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        """True if the measure is invariant under x -> -x."""
        for p, w in zip(self.points, self.weights):
            dist = np.linalg.norm(self.points + p, axis=1)
            j = int(np.argmin(dist))
            if dist[j] > tol or abs(self.weights[j] - w) > tol:
                return False
        return True


@dataclass(frozen=True)
class ReducedFrame:
    """Affine chart ``x = offset + basis.T @ z`` onto the affine hull of a support."""

    offset: np.ndarray
    basis: np.ndarray  # (r, d), orthonormal rows

    @property
    def r(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.offset.shape[0]

    def to_frame(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.offset) @ self.basis.T

    def embed(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.offset + z @ self.basis

    def dual_to_frame(self, phi) -> np.ndarray:
        """Restrict an ambient linear functional to the frame directions."""
        return self.basis @ np.asarray(phi, dtype=float)

    @classmethod
    def identity(cls, d: int) -> "ReducedFrame":
        return cls(np.zeros(d), np.eye(d))


def normalize(points, weights) -> DiscreteMeasure:
    """Build a measure from raw atoms, merging duplicates and rescaling weights.

    Zero-weight atoms are dropped.

    Examples
    --------
    >>> normalize([[-1.0], [1.0]], [2, 2]).weights
    array([0.5, 0.5])
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    w = np.asarray(weights, dtype=float).ravel()
    if pts.shape[0] == 0 or w.size == 0:
        raise MeasureError("empty support")
    if pts.shape[0] != w.shape[0]:
        raise MeasureError(f"{pts.shape[0]} points but {w.shape[0]} weights")
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
        raise MeasureError("non-finite point or weight")
    if np.any(w < 0):
        raise MeasureError("negative weight")
    total = w.sum()
    if total <= 0:
        raise MeasureError("weights are all zero")

    merged_pts: list[np.ndarray] = []
    merged_w: list[float] = []
    for p, wi in zip(pts, w):
        if wi == 0:
            continue
        for k, q in enumerate(merged_pts):
            if np.linalg.norm(p - q) <= POINT_TOL:
                merged_w[k] += wi
                break
        else:
            merged_pts.append(p.copy())
            merged_w.append(float(wi))
    wm = np.array(merged_w) / total
    wm /= wm.sum()
    return DiscreteMeasure(np.array(merged_pts), wm)


def affine_reduce(m: DiscreteMeasure, rtol: float = HULL_RTOL):
    """Express ``m`` in coordinates of its affine hull.

    Returns
    -------
    reduced : DiscreteMeasure
        Measure on R^r with positive definite covariance (r may be 0).
    frame : ReducedFrame
        Chart with ``offset`` at the mean of ``m``.
    """
    mean = m.mean()
    centered = m.points - mean
    scaled = centered * np.sqrt(m.weights)[:, None]
    _, sv, vt = np.linalg.svd(scaled, full_matrices=False)
    if sv.size == 0 or sv[0] <= 0:
        r = 0
    else:
        r = int(np.sum(sv > rtol * sv[0]))
    basis = vt[:r].copy()
    # deterministic orientation: first sizeable entry of each basis vector positive
    for k in range(r):
        j = int(np.argmax(np.abs(basis[k]) > 1e-12))
        if basis[k, j] < 0:
            basis[k] = -basis[k]
    frame = ReducedFrame(mean, basis)
    z = centered @ basis.T
    return DiscreteMeasure(z.reshape(m.size, r), m.weights), frame


def log_mgf(m: DiscreteMeasure, phi):
    """Log moment generating function with gradient and Hessian.

    Parameters
    ----------
    m : DiscreteMeasure
    phi : array_like of shape (d,)

    Returns
    -------
    value : float
        ``log sum_i p_i exp(phi . x_i)``.
    grad : ndarray of shape (d,)
        Mean of the tilted measure.
    hess : ndarray of shape (d, d)
        Covariance of the tilted measure.
    """
    phi = np.asarray(phi, dtype=float).reshape(m.dim)
    logits = np.log(m.weights) + m.points @ phi
    value = float(logsumexp(logits))
    q = np.exp(logits - value)
    q /= q.sum()
    grad = q @ m.points
    c = m.points - grad
    hess = (c * q[:, None]).T @ c
    return value, grad, 0.5 * (hess + hess.T)


def tilted_weights(m: DiscreteMeasure, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float).reshape(m.dim)
    logits = np.log(m.weights) + m.points @ phi
    q = np.exp(logits - logsumexp(logits))
    return q / q.sum()


def tilt_and_center(m: DiscreteMeasure, phi, x_star, tol: float = 1e-8) -> DiscreteMeasure:
    """Exponentially tilt ``m`` by ``phi`` and shift it by ``-x_star``.

    ``x_star`` must be the tilted mean; the returned measure is then centered.
    """
    x_star = np.asarray(x_star, dtype=float).reshape(m.dim)
    q = tilted_weights(m, phi)
    mean = q @ m.points
    if np.linalg.norm(mean - x_star) > tol:
        raise MeasureError(
            f"tilted mean {mean} differs from x* {x_star} by "
            f"{np.linalg.norm(mean - x_star):.3e}"
        )
    # recenter at the exact tilted mean so the result has zero mean to rounding
    return DiscreteMeasure(m.points - mean, q)


def dual_moment(m: DiscreteMeasure, duals: Sequence) -> float:
    """``E[prod_j d_j . X]`` under ``m``; an empty product gives 1."""
    acc = np.array(m.weights, dtype=np.result_type(float, *[np.asarray(d) for d in duals]))
    for d in duals:
        acc = acc * (m.points @ np.asarray(d).reshape(m.dim))
    return acc.sum()


def moment_tensor(m: DiscreteMeasure, order: int) -> np.ndarray:
    """Full moment tensor ``E[X^{(x) order}]`` of shape ``(d,) * order``."""
    t = np.array(m.weights)
    for _ in range(order):
        t = t[..., None] * m.points.reshape((m.size,) + (1,) * (t.ndim - 1) + (m.dim,))
    return t.sum(axis=0) if order else np.asarray(t.sum())
