"""Command line front end: ``analyze``, ``expand`` and ``verify`` on JSON problem files.

Exit codes
----------
0  success
1  ``verify`` ran but the fitted limit disagrees with ``C2`` beyond tolerance
2  variational failure (no maximizer, non-unique maximizer, divergent entropy)
3  criticality (an eigenvalue reached 1)
4  input or I/O error (unreadable file, malformed JSON, invalid problem,
   enumeration guard exceeded)
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .expansion import ExpansionError, MAX_SERIES_ORDER
from .functional import MAX_DEGREE, PolynomialFunctional
from .measure import DiscreteMeasure, MeasureError, normalize
from .oracle import EpsilonConfig, ExtrapolationError, OracleGuardError, sweep
from .pipeline import analyze
from .spectral import CriticalityError
from .variational import UniquenessViolation, VariationalError

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_VARIATIONAL = 2
EXIT_CRITICAL = 3
EXIT_INPUT = 4

WEIGHT_WARN = 0.15

DEFAULT_OPTIONS = {
    "crit_tol": 1e-6,
    "newton_tol": 1e-12,
    "max_order": 1,
    "epsilon": None,
    "n_grid": [50, 100, 200, 400],
    "multistart": 8,
    "seed": 0,
    "fit_powers": [0, 1, 2],
    "verify_tol": 1e-4,
    "verify_rtol": 0.0,
}


class ProblemError(ValueError):
    """Invalid problem file; ``where`` names the offending field or line."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class ProblemFile:
    dimension: int
    points: tuple
    weights: tuple
    tensors: tuple  # ((order, ((index, value), ...)), ...) sorted
    options: tuple  # sorted (key, value) pairs with defaults filled
    warnings: tuple = field(default=(), compare=False)

    @property
    def opts(self) -> dict:
        return dict(self.options)

    def measure(self) -> DiscreteMeasure:
        return normalize(np.array(self.points, dtype=float).reshape(len(self.points), self.dimension),
                         np.array(self.weights))

    def functional(self) -> PolynomialFunctional:
        d = self.dimension
        dense = {}
        for order, entries in self.tensors:
            t = np.zeros((d,) * order)
            for index, value in entries:
                for perm in set(itertools.permutations(index)):
                    t[perm] = value
            dense[order] = t
        return PolynomialFunctional(d, dense)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "measure": {"points": [list(p) for p in self.points], "weights": list(self.weights)},
            "phi": {"tensors": [
                {"order": order, "entries": [{"index": list(i), "value": v} for i, v in entries]}
                for order, entries in self.tensors]},
            "options": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.options},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _number(x, where) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ProblemError(where, f"expected a finite number, got {x!r}")
    return float(x)


def _int(x, where) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ProblemError(where, f"expected an integer, got {x!r}")
    return x


def _parse_options(raw, where="options") -> tuple:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ProblemError(where, "expected an object")
    unknown = sorted(set(raw) - set(DEFAULT_OPTIONS))
    if unknown:
        raise ProblemError(f"{where}.{unknown[0]}", "unknown option")
    opts = dict(DEFAULT_OPTIONS)
    opts.update(raw)
    for key in ("crit_tol", "newton_tol", "verify_tol", "verify_rtol"):
        v = _number(opts[key], f"{where}.{key}")
        if v < 0 or (key in ("crit_tol", "newton_tol") and v == 0):
            raise ProblemError(f"{where}.{key}", "must be positive")
        opts[key] = v
    opts["max_order"] = _int(opts["max_order"], f"{where}.max_order")
    if not 0 <= opts["max_order"] <= MAX_SERIES_ORDER:
        raise ProblemError(f"{where}.max_order", f"must be in 0..{MAX_SERIES_ORDER}")
    if opts["epsilon"] is not None:
        opts["epsilon"] = _number(opts["epsilon"], f"{where}.epsilon")
        if opts["epsilon"] <= 0:
            raise ProblemError(f"{where}.epsilon", "must be positive")
    opts["multistart"] = _int(opts["multistart"], f"{where}.multistart")
    opts["seed"] = _int(opts["seed"], f"{where}.seed")
    for key in ("n_grid", "fit_powers"):
        seq = opts[key]
        if not isinstance(seq, (list, tuple)) or not seq:
            raise ProblemError(f"{where}.{key}", "expected a non-empty list of integers")
        vals = tuple(_int(v, f"{where}.{key}[{i}]") for i, v in enumerate(seq))
        opts[key] = tuple(sorted(set(vals)))
    if min(opts["n_grid"]) < 1:
        raise ProblemError(f"{where}.n_grid", "grid values must be >= 1")
    return tuple(sorted(opts.items()))


def parse_problem(doc) -> ProblemFile:
    """Validate a decoded problem document."""
    if not isinstance(doc, dict):
        raise ProblemError("<root>", "expected an object")
    for key in ("dimension", "measure", "phi"):
        if key not in doc:
            raise ProblemError(key, "missing required field")
    extra = sorted(set(doc) - {"dimension", "measure", "phi", "options"})
    if extra:
        raise ProblemError(extra[0], "unknown field")
    d = _int(doc["dimension"], "dimension")
    if d < 1:
        raise ProblemError("dimension", "must be >= 1")

    meas = doc["measure"]
    if not isinstance(meas, dict) or "points" not in meas or "weights" not in meas:
        raise ProblemError("measure", "expected an object with 'points' and 'weights'")
    pts_raw, w_raw = meas["points"], meas["weights"]
    if not isinstance(pts_raw, list) or not pts_raw:
        raise ProblemError("measure.points", "expected a non-empty list")
    if not isinstance(w_raw, list) or len(w_raw) != len(pts_raw):
        raise ProblemError("measure.weights", f"expected a list of {len(pts_raw)} numbers")
    points = []
    for i, p in enumerate(pts_raw):
        if d == 1 and not isinstance(p, list):
            p = [p]
        if not isinstance(p, list) or len(p) != d:
            raise ProblemError(f"measure.points[{i}]", f"expected {d} coordinates")
        points.append(tuple(_number(c, f"measure.points[{i}][{j}]") for j, c in enumerate(p)))
    weights = [_number(w, f"measure.weights[{i}]") for i, w in enumerate(w_raw)]
    for i, w in enumerate(weights):
        if w < 0:
            raise ProblemError(f"measure.weights[{i}]", "negative weight")
    total = math.fsum(weights)
    warnings = []
    if abs(total - 1.0) > WEIGHT_WARN:
        raise ProblemError("measure.weights", f"weights sum to {total:g}; |sum - 1| exceeds {WEIGHT_WARN}")
    if abs(total - 1.0) > 1e-12:
        warnings.append(f"weights summed to {total!r}; normalized")
        weights = [w / total for w in weights]

    phi = doc["phi"]
    if not isinstance(phi, dict) or not isinstance(phi.get("tensors"), list):
        raise ProblemError("phi", "expected an object with a 'tensors' list")
    tensors = {}
    for ti, block in enumerate(phi["tensors"]):
        where = f"phi.tensors[{ti}]"
        if not isinstance(block, dict) or "order" not in block or "entries" not in block:
            raise ProblemError(where, "expected an object with 'order' and 'entries'")
        order = _int(block["order"], f"{where}.order")
        if not 0 <= order <= MAX_DEGREE:
            raise ProblemError(f"{where}.order", f"must be in 0..{MAX_DEGREE}")
        if order in tensors:
            raise ProblemError(f"{where}.order", f"duplicate tensor of order {order}")
        if not isinstance(block["entries"], list):
            raise ProblemError(f"{where}.entries", "expected a list")
        entries = {}
        for ei, ent in enumerate(block["entries"]):
            ew = f"{where}.entries[{ei}]"
            if not isinstance(ent, dict) or "index" not in ent or "value" not in ent:
                raise ProblemError(ew, "expected an object with 'index' and 'value'")
            idx = ent["index"]
            if not isinstance(idx, list) or len(idx) != order:
                raise ProblemError(f"{ew}.index", f"expected {order} indices")
            idx = tuple(_int(k, f"{ew}.index") for k in idx)
            if any(k < 0 or k >= d for k in idx):
                raise ProblemError(f"{ew}.index", f"index {list(idx)} out of range for dimension {d}")
            if list(idx) != sorted(idx):
                raise ProblemError(f"{ew}.index", f"index {list(idx)} is not non-decreasing")
            if idx in entries:
                raise ProblemError(f"{ew}.index", f"duplicate orbit entry for index {list(idx)}")
            entries[idx] = _number(ent["value"], f"{ew}.value")
        tensors[order] = tuple(sorted(entries.items()))
    options = _parse_options(doc.get("options"))
    return ProblemFile(d, tuple(points), tuple(weights),
                       tuple(sorted(tensors.items())), options, tuple(warnings))


def load_problem(path) -> ProblemFile:
    """Read and validate a problem file.

    Raises
    ------
    ProblemError
        With a ``line N, column M`` location for malformed JSON or a dotted
        field path for invalid content.
    OSError
        If the file cannot be read.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from exc
    return parse_problem(doc)


# --- reports ---

def _clean(x):
    """Recursively convert numpy values to JSON-serializable Python objects."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _base_report(problem: ProblemFile, command: str) -> dict:
    return {
        "command": command,
        "tool_version": __version__,
        "input_digest": problem.digest(),
        "warnings": list(problem.warnings),
        "flags": {},
    }


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _run_analysis(problem: ProblemFile, report: dict, seed=None):
    opts = problem.opts
    try:
        res = analyze(problem.measure(), problem.functional(), crit_tol=opts["crit_tol"],
                      newton_tol=opts["newton_tol"], multistart=opts["multistart"],
                      seed=opts["seed"] if seed is None else seed)
    except UniquenessViolation as exc:
        report["flags"].update({"A3_violated": True, "A3_roots": [r.x for r in exc.roots]})
        report["error"] = str(exc)
        return None, EXIT_VARIATIONAL
    except VariationalError as exc:
        report["flags"]["variational_failure"] = True
        report["error"] = str(exc)
        return None, EXIT_VARIATIONAL
    except CriticalityError as exc:
        report["flags"].update({"A4_violated": True, "A4_index": exc.index, "A4_eigenvalue": exc.value})
        report["error"] = str(exc)
        return None, EXIT_CRITICAL
    ctx = res.context
    report.update({
        "x_star": ctx.x_star_ambient,
        "phi_star": ctx.phi_star_ambient,
        "lambda": ctx.lam,
        "eigenvalues": res.spectrum.a,
        "C0": res.c0,
        "C2": {"total": res.c2, "breakdown": res.report.c2_breakdown},
    })
    report["flags"].update(res.report.flags)
    report["flags"]["A4_violated"] = False
    return res, EXIT_OK


def cmd_analyze(problem: ProblemFile, seed=None):
    report = _base_report(problem, "analyze")
    _, code = _run_analysis(problem, report, seed)
    return report, code


def cmd_expand(problem: ProblemFile, order=None, seed=None):
    N = problem.opts["max_order"] if order is None else order
    if not 0 <= N <= MAX_SERIES_ORDER:
        raise ExpansionError(f"series order {N} not in 0..{MAX_SERIES_ORDER}")
    report = _base_report(problem, "expand")
    res, code = _run_analysis(problem, report, seed)
    if res is None:
        return report, code
    eps = problem.opts["epsilon"]
    eps = EpsilonConfig(eps) if eps is not None else EpsilonConfig.default_for(res.context.nu0)
    series = res.series(N)
    report["series"] = series.as_dict()
    report["epsilon"] = eps.epsilon
    return report, code


def cmd_verify(problem: ProblemFile, grid=None, mc=None, seed=None):
    """Returns ``(report, csv_text, exit_code)``."""
    opts = problem.opts
    report = _base_report(problem, "verify")
    res, code = _run_analysis(problem, report, seed)
    if res is None:
        return report, None, code
    ns = tuple(sorted(set(grid))) if grid else opts["n_grid"]
    sw = sweep(problem.measure(), problem.functional(), res.lam, res.c0, ns,
               powers=opts["fit_powers"], mc_samples=mc,
               seed=opts["seed"] if seed is None else seed)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "log_Zn", "Un", "Rn"])
    for n, lz, u, r in sw.rows():
        writer.writerow([n, repr(lz), repr(u), repr(r)])
    report["sweep"] = {
        "method": sw.meta["method"],
        "n": sw.ns, "log_Zn": sw.log_zn, "Un": sw.un, "Rn": sw.rn,
    }
    if sw.se is not None:
        report["sweep"]["log_Zn_se"] = sw.se
    if sw.fit is None:
        raise ExtrapolationError("grid too small to fit the limit")
    report["fit"] = sw.fit.as_dict()
    diff = abs(sw.fit.limit - res.c2)
    tol = opts["verify_tol"] + opts["verify_rtol"] * abs(res.c2)
    report["fit"].update({"abs_error": diff, "tolerance": tol, "pass": diff <= tol})
    return report, buf.getvalue(), EXIT_OK if diff <= tol else EXIT_MISMATCH


def _grid(text: str):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("grid values must be positive integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laplace-asymptotics",
                                description="Large-n expansion of E[exp(n Phi(S_n/n))] for discrete measures.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("problem", help="problem JSON file")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--seed", type=int, default=None, help="override options.seed")

    a = sub.add_parser("analyze", help="optimum, spectrum, C0 and C2")
    common(a)
    e = sub.add_parser("expand", help="series coefficients of the quadratic part")
    common(e)
    e.add_argument("--order", type=int, default=None, help=f"series order N <= {MAX_SERIES_ORDER}")
    v = sub.add_parser("verify", help="compare C2 with an exact or Monte Carlo sweep")
    common(v)
    v.add_argument("--n", type=_grid, default=None, help="comma-separated grid, e.g. 50,100,200,400")
    v.add_argument("--mc", type=int, default=None, metavar="SAMPLES",
                   help="use Monte Carlo with this many samples instead of enumeration")
    v.add_argument("--report", default=None, help="JSON report path when --out holds the CSV")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        problem = load_problem(args.problem)
        if args.command == "analyze":
            report, code = cmd_analyze(problem, args.seed)
            _write(dump_report(report), args.out)
        elif args.command == "expand":
            report, code = cmd_expand(problem, args.order, args.seed)
            _write(dump_report(report), args.out)
        else:
            report, table, code = cmd_verify(problem, args.n, args.mc, args.seed)
            if args.out is not None and table is not None:
                _write(table, args.out)
                _write(dump_report(report), args.report)
            else:
                _write(dump_report(report), args.report if args.report else None)
    except (ProblemError, MeasureError, OSError, OracleGuardError, ExtrapolationError, ExpansionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if code:
        print(f"error: {report.get('error', 'fitted limit outside tolerance')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
