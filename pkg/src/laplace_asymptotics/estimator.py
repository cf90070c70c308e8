"""scikit-learn style facade: fit on support points and weights, predict ``U_n``."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import _check_sample_weight, check_array, check_is_fitted

from .functional import PolynomialFunctional
from .measure import normalize
from .pipeline import analyze
from .spectral import CRIT_TOL
from .variational import NEWTON_TOL


def check_support(X, sample_weight=None):
    """Validate support points ``X`` of shape (s, d) and nonnegative weights.

    Returns the validated ``(X, w)`` with ``w`` normalized to sum to one.
    """
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    w = _check_sample_weight(sample_weight, X, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("sample_weight must be nonnegative")
    if w.sum() <= 0:
        raise ValueError("sample_weight sums to zero")
    return X, w / w.sum()


def check_n(n):
    """Validate sample sizes: a positive integer or 1-d array of them."""
    arr = np.asarray(n)
    if arr.ndim > 1:
        raise ValueError("n must be a scalar or 1-d array")
    if not np.all(np.isfinite(arr)) or np.any(arr < 1):
        raise ValueError("n must be >= 1")
    return arr.astype(float)


def _as_functional(phi, dim: int) -> PolynomialFunctional:
    if isinstance(phi, PolynomialFunctional):
        if phi.dim != dim:
            raise ValueError(f"phi has dimension {phi.dim}, data {dim}")
        return phi
    if phi is None:
        return PolynomialFunctional.zero(dim)
    if isinstance(phi, dict):
        return PolynomialFunctional.from_tensors(dim, phi)
    raise TypeError("phi must be a PolynomialFunctional, a dict {order: tensor} or None")


class LaplaceExpansion(BaseEstimator):
    """Leading and first-order coefficients of ``E[exp(n Phi(S_n/n))]``.

    Parameters
    ----------
    phi : PolynomialFunctional or dict or None
        The functional; a dict maps order to a (not necessarily symmetric)
        coefficient tensor. ``None`` means zero.
    crit_tol : float
        Eigenvalues at or above ``1 - crit_tol`` are treated as critical.
    newton_tol : float
        Residual tolerance of the fixed-point solve.
    multistart : int
        Random interior starting points in addition to the atoms and the mean.
    random_state : int
        Seed for the random starting points.
    series_order : int
        If positive, also compute the quadratic-part series to this order.

    Attributes
    ----------
    x_star_, phi_star_ : ndarray
        Maximizer and tilt in input coordinates.
    lambda_ : float
        ``max (Phi - h)``.
    eigenvalues_ : ndarray
    c0_, c2_ : float
    c2_breakdown_ : dict
    series_ : PowerSeries or None
    analysis_ : Analysis

    Examples
    --------
    >>> import numpy as np
    >>> est = LaplaceExpansion(phi={2: np.array([[0.25]])}).fit([[-1.0], [1.0]])
    >>> round(est.c2_, 7)
    -0.3535534
    """

    def __init__(self, phi=None, crit_tol=CRIT_TOL, newton_tol=NEWTON_TOL, multistart=8,
                 random_state=0, series_order=0):
        self.phi = phi
        self.crit_tol = crit_tol
        self.newton_tol = newton_tol
        self.multistart = multistart
        self.random_state = random_state
        self.series_order = series_order

    def fit(self, X, y=None, sample_weight=None):
        X, w = check_support(X, sample_weight)
        phi = _as_functional(self.phi, X.shape[1])
        res = analyze(normalize(X, w), phi, crit_tol=self.crit_tol, newton_tol=self.newton_tol,
                      multistart=self.multistart, seed=self.random_state)
        ctx = res.context
        self.n_features_in_ = X.shape[1]
        self.analysis_ = res
        self.x_star_ = ctx.x_star_ambient
        self.phi_star_ = ctx.phi_star_ambient
        self.lambda_ = ctx.lam
        self.eigenvalues_ = res.spectrum.a
        self.c0_ = res.c0
        self.c2_ = res.c2
        self.c2_breakdown_ = dict(res.report.c2_breakdown)
        self.series_ = res.series(self.series_order) if self.series_order > 0 else None
        return self

    def predict(self, n):
        """``C0 + C2 / n``, the approximation of ``U_n = exp(-n lambda) Z_n``."""
        check_is_fitted(self, "c0_")
        n = check_n(n)
        return self.c0_ + self.c2_ / n

    def predict_log_Zn(self, n):
        """``n lambda + log(C0 + C2 / n)``."""
        n = check_n(n)
        return n * self.lambda_ + np.log(self.predict(n))
