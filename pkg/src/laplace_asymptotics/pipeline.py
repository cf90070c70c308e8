"""End-to-end driver: optimum, spectrum, moment polynomials, coefficients."""

from __future__ import annotations

from dataclasses import dataclass

from .expansion import (
    ExpansionReport,
    MomentPolynomialCache,
    PowerSeries,
    build_moment_cache,
    c2_coefficient,
    quadratic_series,
)
from .functional import PolynomialFunctional
from .measure import DiscreteMeasure
from .spectral import CRIT_TOL, Spectrum, eigensystem
from .variational import NEWTON_TOL, AnalysisContext, analyze_optimum


@dataclass
class Analysis:
    context: AnalysisContext
    spectrum: Spectrum
    cache: MomentPolynomialCache
    report: ExpansionReport

    @property
    def lam(self) -> float:
        return self.context.lam

    @property
    def c0(self) -> float:
        return self.report.c0

    @property
    def c2(self) -> float:
        return self.report.c2_total

    def series(self, N: int) -> PowerSeries:
        """Quadratic-part series of order ``N``; extends the moment cache when needed."""
        need = 2 * N + 2
        if self.cache.max_m < need:
            self.cache = build_moment_cache(self.context, self.spectrum, need)
        return quadratic_series(self.cache, self.spectrum, N)


def analyze(measure: DiscreteMeasure, phi: PolynomialFunctional, crit_tol: float = CRIT_TOL,
            newton_tol: float = NEWTON_TOL, multistart: int = 8, seed: int = 0,
            max_m: int = 4) -> Analysis:
    """Run the full pipeline and return ``lambda``, ``C0``, ``C2`` and intermediates."""
    ctx = analyze_optimum(measure, phi, multistart=multistart, seed=seed, tol=newton_tol)
    psi2 = ctx.functional.hessian(ctx.x_star)
    spectrum = eigensystem(ctx.gamma, psi2, crit_tol)
    cache = build_moment_cache(ctx, spectrum, max(4, max_m))
    report = c2_coefficient(cache, spectrum, ctx)
    report.flags.update(ctx.flags)
    report.flags["A4_max_eigenvalue"] = float(spectrum.a.max()) if spectrum.r else None
    return Analysis(ctx, spectrum, cache, report)
