"""Rate function of a discrete measure and the maximizer of ``Phi - h``.

The maximizer is located through its fixed-point characterization: at the
optimum ``x*`` the measure tilted by ``phi* = DPhi(x*)`` has mean ``x*``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .functional import FrameFunctional, PolynomialFunctional, pullback
from .measure import (
    DiscreteMeasure,
    ReducedFrame,
    affine_reduce,
    log_mgf,
    tilt_and_center,
)

NEWTON_TOL = 1e-12
MAX_ITER = 200
ROOT_MERGE = 1e-6
A3_VALUE_TOL = 1e-8
A3_DIST_TOL = 1e-4
BOUNDARY_RTOL = 1e-10


class VariationalError(RuntimeError):
    """The variational problem could not be solved."""


class EntropyDivergence(VariationalError):
    """``x`` is not in the relative interior of the support hull."""


class UniquenessViolation(VariationalError):
    """Two distinct maximizers of ``Phi - h`` tie (assumption A3 fails)."""

    def __init__(self, message, roots):
        super().__init__(message)
        self.roots = roots


def _solve_psd(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(H, g, rcond=None)[0]


def _entropy_reduced(m: DiscreteMeasure, x: np.ndarray, tol: float, max_iter: int):
    r = m.dim
    if r == 0:
        return 0.0, np.zeros(0)
    phi = np.zeros(r)
    val, grad, hess = log_mgf(m, phi)
    obj = phi @ x - val
    for _ in range(max_iter):
        resid = x - grad
        if np.linalg.norm(resid) <= tol:
            return float(obj), phi
        step = _solve_psd(hess, resid)
        t = 1.0
        for _ in range(60):
            cand = phi + t * step
            cval, cgrad, chess = log_mgf(m, cand)
            cobj = cand @ x - cval
            # near convergence the objective gain drops below rounding; fall back on the residual
            if cobj > obj or (cobj >= obj - 1e-13 * max(1.0, abs(obj))
                              and np.linalg.norm(x - cgrad) < np.linalg.norm(resid)):
                break
            t *= 0.5
        else:
            break
        phi, val, grad, hess, obj = cand, cval, cgrad, chess, cobj
        if np.linalg.norm(phi) > 1e4 or not np.isfinite(obj):
            break
    raise EntropyDivergence(
        f"entropy solve did not converge at x={x}: |grad residual|="
        f"{np.linalg.norm(x - grad):.3e}, |phi|={np.linalg.norm(phi):.3e}; "
        "x is outside or on the boundary of the support hull"
    )


def interior_depth(m: DiscreteMeasure, x) -> float:
    """Largest ``t`` with ``x = sum_i w_i p_i``, ``sum w = 1``, all ``w_i >= t``.

    Positive exactly when ``x`` lies in the relative interior of the hull.
    """
    s = m.size
    # variables (w_1..w_s, t); maximize t
    c = np.zeros(s + 1)
    c[-1] = -1.0
    A_eq = np.zeros((m.dim + 1, s + 1))
    A_eq[:m.dim, :s] = m.points.T
    A_eq[m.dim, :s] = 1.0
    b_eq = np.append(np.asarray(x, dtype=float), 1.0)
    A_ub = np.hstack([-np.eye(s), np.ones((s, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(s), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, 1)] * s + [(None, 1)], method="highs")
    return float(-res.fun) if res.status == 0 else -np.inf


def entropy(m: DiscreteMeasure, x, tol: float = 1e-10, max_iter: int = MAX_ITER):
    """Legendre transform of the log-MGF of ``m`` at ``x``.

    Returns
    -------
    h : float
        ``sup_phi {phi . x - log M(phi)}``.
    phi : ndarray
        The maximizing dual vector (ambient coordinates, orthogonal to the
        directions in which the support is flat).

    Raises
    ------
    EntropyDivergence
        If ``x`` is not in the relative interior of the convex hull.
    """
    x = np.asarray(x, dtype=float).reshape(m.dim)
    reduced, frame = affine_reduce(m)
    z = frame.to_frame(x)
    if np.linalg.norm(frame.embed(z) - x) > 1e-10 * max(1.0, np.linalg.norm(x)):
        raise EntropyDivergence(f"x={x} is not in the affine hull of the support")
    depth = interior_depth(reduced, z)
    if depth <= 1e-12:
        raise EntropyDivergence(
            f"x={x} is outside or on the boundary of the support hull (depth {depth:.3e})")
    h, phi_red = _entropy_reduced(reduced, z, tol, max_iter)
    return h, phi_red @ frame.basis


def _fixed_point_residual(m, phi_fn, x):
    phi = phi_fn.gradient(x)
    val, grad, hess = log_mgf(m, phi)
    return grad - x, hess, phi, val


def _newton_root(m: DiscreteMeasure, phi_fn: PolynomialFunctional, x0, tol, max_iter):
    x = np.array(x0, dtype=float)
    F, cov, _, _ = _fixed_point_residual(m, phi_fn, x)
    nF = np.linalg.norm(F)
    for _ in range(max_iter):
        if nF <= tol:
            return x, True
        J = cov @ phi_fn.hessian(x) - np.eye(m.dim)
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(J, F, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            step = -np.linalg.lstsq(J, F, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            cand = x + t * step
            cF, ccov, _, _ = _fixed_point_residual(m, phi_fn, cand)
            if np.linalg.norm(cF) < nF:
                break
            t *= 0.5
        else:
            return x, nF <= tol
        x, F, cov, nF = cand, cF, ccov, np.linalg.norm(cF)
    return x, nF <= tol


@dataclass(frozen=True)
class Root:
    x: np.ndarray  # reduced coordinates
    phi: np.ndarray
    h: float
    value: float  # Phi(x) - h(x)


@dataclass(frozen=True)
class MaximizerResult:
    x: np.ndarray
    phi: np.ndarray
    lam: float
    h: float
    roots: tuple = ()
    starts: int = 0


def _start_points(m: DiscreteMeasure, multistart: int, seed: int):
    starts = [p for p in m.points]
    starts.append(m.mean())
    if multistart > 0:
        rng = np.random.default_rng(seed)
        w = rng.dirichlet(np.ones(m.size), size=multistart)
        starts.extend(w @ m.points)
    return starts


def _same_peak(m: DiscreteMeasure, phi: PolynomialFunctional, r1: Root, r2: Root) -> bool:
    """True if ``Phi - h`` does not dip between two roots.

    Near a degenerate maximum the fixed-point residual is flat, so Newton
    stops at scattered points of one peak; genuinely separate maxima are
    divided by a valley.
    """
    floor = min(r1.value, r2.value) - A3_VALUE_TOL
    for t in (0.25, 0.5, 0.75):
        x = (1 - t) * r1.x + t * r2.x
        try:
            h, _ = _entropy_reduced(m, x, 1e-12, MAX_ITER)
        except EntropyDivergence:
            return False
        if float(phi.eval(x)) - h < floor:
            return False
    return True


def find_maximizer(
    m: DiscreteMeasure,
    phi: PolynomialFunctional,
    multistart: int = 8,
    seed: int = 0,
    tol: float = NEWTON_TOL,
    max_iter: int = MAX_ITER,
) -> MaximizerResult:
    """Locate the maximizer of ``phi - h`` by multistart Newton on the fixed point map.

    ``m`` should be affinely reduced (positive definite covariance) and
    ``phi`` expressed in the same coordinates.

    Raises
    ------
    VariationalError
        If no start converges.
    UniquenessViolation
        If two well separated roots attain the same value within ``1e-8``.
    """
    if phi.dim != m.dim:
        raise VariationalError("functional and measure dimensions differ")
    if m.dim == 0:
        z = np.zeros(0)
        v = phi.eval(z)
        return MaximizerResult(z, np.zeros(0), float(v), 0.0, (Root(z, z, 0.0, float(v)),), 1)

    roots: list[Root] = []
    starts = _start_points(m, multistart, seed)
    for x0 in starts:
        x, ok = _newton_root(m, phi, x0, tol, max_iter)
        if not ok:
            continue
        if any(np.linalg.norm(x - r.x) <= ROOT_MERGE for r in roots):
            continue
        dphi = phi.gradient(x)
        lmgf = log_mgf(m, dphi)[0]
        h = float(dphi @ x - lmgf)
        roots.append(Root(x, dphi, h, float(phi.eval(x)) - h))
    if not roots:
        raise VariationalError(f"fixed-point Newton failed from all {len(starts)} starts")

    # deterministic reduction: best value, then lexicographically smallest x
    roots.sort(key=lambda r: (-r.value, tuple(r.x)))
    best = roots[0]
    for other in roots[1:]:
        if (abs(other.value - best.value) <= A3_VALUE_TOL
                and np.linalg.norm(other.x - best.x) > A3_DIST_TOL
                and not _same_peak(m, phi, best, other)):
            raise UniquenessViolation(
                f"maximizer not unique: roots {best.x} and {other.x} both reach "
                f"{best.value:.12g}", tuple(roots))
    return MaximizerResult(best.x, best.phi, best.value, best.h, tuple(roots), len(starts))


@dataclass(frozen=True)
class AnalysisContext:
    """Everything downstream computations need about the optimum.

    Attributes prefixed with nothing are in reduced (affine hull) coordinates;
    ``x_star_ambient`` and ``phi_star_ambient`` are in the input coordinates.
    """

    x_star: np.ndarray
    phi_star: np.ndarray
    lam: float
    nu0: DiscreteMeasure
    gamma: np.ndarray
    frame: ReducedFrame
    functional: FrameFunctional
    x_star_ambient: np.ndarray
    phi_star_ambient: np.ndarray
    roots: tuple = ()
    flags: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.gamma.shape[0]


def assemble_context(
    measure: DiscreteMeasure,
    phi: PolynomialFunctional,
    solution: MaximizerResult,
    reduced: DiscreteMeasure,
    frame: ReducedFrame,
    functional: FrameFunctional,
) -> AnalysisContext:
    """Tilt and center at the optimum and check the fixed-point identities."""
    x, phi_r = solution.x, solution.phi
    _, tilted_mean, _ = log_mgf(reduced, phi_r)
    fp_err = float(np.linalg.norm(tilted_mean - x))
    if fp_err > 1e-9:
        raise VariationalError(f"fixed point residual {fp_err:.3e} exceeds 1e-9")
    nu0 = tilt_and_center(reduced, phi_r, x)
    gamma = nu0.second_moment()
    if reduced.dim:
        h_leg, _ = _entropy_reduced(reduced, x, 1e-12, MAX_ITER)
    else:
        h_leg = 0.0
    if abs(h_leg - solution.h) > 1e-9:
        raise VariationalError(f"entropy mismatch: Legendre {h_leg!r} vs fixed point {solution.h!r}")
    ev = np.linalg.eigvalsh(gamma) if gamma.size else np.array([1.0])
    if ev.min() <= 1e-10 * ev.max():
        raise VariationalError("tilted covariance is singular")
    base = np.linalg.eigvalsh(reduced.covariance()).max() if gamma.size else 1.0
    if ev.min() <= BOUNDARY_RTOL * base:
        raise VariationalError(
            f"maximizer at the boundary of the support hull: tilted covariance eigenvalue "
            f"{ev.min():.3e} vs base scale {base:.3e}")
    x_amb = frame.embed(x)
    flags = {
        "A3_roots_found": len(solution.roots),
        "A3_unique": True,
        "fixed_point_residual": fp_err,
        "entropy_two_way_diff": abs(h_leg - solution.h),
    }
    return AnalysisContext(
        x_star=x,
        phi_star=phi_r,
        lam=solution.lam,
        nu0=nu0,
        gamma=gamma,
        frame=frame,
        functional=functional,
        x_star_ambient=x_amb,
        phi_star_ambient=phi.gradient(x_amb),
        roots=solution.roots,
        flags=flags,
    )


def analyze_optimum(measure: DiscreteMeasure, phi: PolynomialFunctional,
                    multistart: int = 8, seed: int = 0, tol: float = NEWTON_TOL) -> AnalysisContext:
    """Reduce to the affine hull, find ``x*`` and assemble the context."""
    if phi.dim != measure.dim:
        raise VariationalError(f"functional has dimension {phi.dim}, measure {measure.dim}")
    reduced, frame = affine_reduce(measure)
    fphi = pullback(phi, frame)
    sol = find_maximizer(reduced, fphi, multistart=multistart, seed=seed, tol=tol)
    return assemble_context(measure, phi, sol, reduced, frame, fphi)
