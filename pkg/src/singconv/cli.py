"""Command line interface and orchestration: sweeps, thresholds, reports.

A parameter point is marked NonexistenceEvidence in one of two ways:

* ∫ t p diverges and the regularized family grows without contracting;
* the solver fails on the base mesh and on two successive refinements.

Both are surrogates: a numerical method can only fail to find a solution.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .bvp1d import diagnose_family, solve_regularized_family, solve_taliaferro
from .grid import CONVERGED, MAX_ITERATIONS, NONEXISTENCE, GridFunction, SolveReport, central_derivative, make_mesh
from .model import (
    NONEXISTENT,
    DomainError,
    Geometry,
    ProblemSpec,
    classify_existence,
    classify_regime,
    load_config,
    power_spec,
    spec_from_dict,
)
from .quad import check_keller_osserman, check_pg_integrable, check_tp_integrable
from .radial import eigenpair, solve_linear_source, solve_problem, solve_radial
from .transform import build_transform, eval_h, verify_transform
from .verify import SOLUTION, SUB, SUPER, fit_boundary_asymptotics, minus_supersolution, plus_subsolution, residual_classify

FAILED = "failed"
INDETERMINATE = "indeterminate"

# (grading ratio, h_max) for the base mesh and two refinements
REFINEMENTS = ((1.05, 0.005), (1.025, 0.0025), (1.0125, 0.00125))
FAMILY_EPS = (1e-1, 1e-2, 1e-3, 1e-4)
CSV_COLUMNS = ("alpha", "beta", "a", "mu", "lambda", "q", "outcome", "max_u", "exponent", "iterations")


def refined_nodes(geom: Geometry, level: int) -> np.ndarray:
    ratio, h_max = REFINEMENTS[level]
    return make_mesh(geom, ratio=ratio, h_max=h_max)


# ---------------------------------------------------------------------------
# one parameter point
# ---------------------------------------------------------------------------


@dataclass
class PointOutcome:
    outcome: str
    solution: GridFunction | None
    report: SolveReport
    level: int | None = None
    attempts: list[str] = field(default_factory=list)


def _solve_once(spec: ProblemSpec, nodes: np.ndarray, tol: float, max_iter: int):
    if spec.f.kind == "linear" and spec.sign == "minus":
        return solve_linear_source(spec, nodes, tol=max(tol, 1e-8))
    if spec.geometry.kind == "ball":
        return solve_radial(spec, nodes, tol=tol, max_iter=max_iter)
    return solve_problem(spec, nodes, tol=tol, max_iter=max_iter)


def solve_point(spec: ProblemSpec, *, tol: float = 1e-10, max_iter: int = 100) -> PointOutcome:
    """Solve one problem and classify the outcome.

    (P)⁻ with ∫ t p = ∞ is decided by the regularized family.  Otherwise
    the solve is attempted on the base mesh and two refinements; the first
    success is returned and failure on all three is NonexistenceEvidence.
    The linear-source solver decides nonexistence by itself (unbounded
    monotone iterates) and is run on the base mesh only.
    """
    if spec.sign == "minus" and not check_tp_integrable(spec.weight).is_finite:
        reports = solve_regularized_family(spec.weight, spec.g, FAMILY_EPS)
        verdict = diagnose_family(reports)
        outcome = NONEXISTENCE if verdict.status == NONEXISTENCE else FAILED
        return PointOutcome(outcome, None, verdict)
    attempts = []
    rep = None
    for level in range(len(REFINEMENTS)):
        u, rep = _solve_once(spec, refined_nodes(spec.geometry, level), tol, max_iter)
        attempts.append(rep.status)
        if rep.converged:
            return PointOutcome(CONVERGED, u, rep, level, attempts)
        if rep.status == NONEXISTENCE:
            return PointOutcome(NONEXISTENCE, None, rep, level, attempts)
        if rep.status == MAX_ITERATIONS and spec.f.kind == "linear":
            return PointOutcome(INDETERMINATE, None, rep, level, attempts)
    return PointOutcome(NONEXISTENCE, None, rep, len(REFINEMENTS) - 1, attempts)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    a_values: tuple[float, ...] = (0.5,)
    mus: tuple[float, ...] = (1.0,)
    lam: float = 1.0
    q: float | None = 0.5
    sign: str = "minus"
    geometry: Geometry = field(default_factory=Geometry.interval)
    tol: float = 1e-10
    max_iter: int = 100

    def points(self):
        grid = itertools.product(sorted(self.alphas), sorted(self.betas), sorted(self.a_values), sorted(self.mus))
        return list(grid)


@dataclass(frozen=True)
class SweepResult:
    alpha: float
    beta: float
    a: float
    mu: float
    lam: float
    q: float | None
    outcome: str
    max_u: float
    exponent: float
    iterations: int

    @property
    def key(self):
        return (self.alpha, self.beta, self.a, self.mu, self.lam, -1.0 if self.q is None else self.q)

    def row(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "a": self.a,
            "mu": self.mu,
            "lambda": self.lam,
            "q": self.q,
            "outcome": self.outcome,
            "max_u": self.max_u,
            "exponent": self.exponent,
            "iterations": self.iterations,
        }


def run_point(cfg: SweepConfig, point) -> SweepResult:
    alpha, beta, a, mu = point
    try:
        spec = power_spec(alpha, beta, sign=cfg.sign, q=cfg.q, lam=cfg.lam, mu=mu, a=a, geometry=cfg.geometry)
        res = solve_point(spec, tol=cfg.tol, max_iter=cfg.max_iter)
        outcome = res.outcome if res.outcome in (CONVERGED, NONEXISTENCE) else FAILED
        max_u = exponent = math.nan
        if res.solution is not None:
            max_u = res.solution.max()
            regime = classify_regime(alpha, beta)
            if regime.regime != NONEXISTENT:
                try:
                    exponent = fit_boundary_asymptotics(res.solution, cfg.geometry, regime).exponent
                except ValueError:
                    pass
        iterations = int(res.report.iterations)
    except (ArithmeticError, ValueError, DomainError):
        outcome, max_u, exponent, iterations = FAILED, math.nan, math.nan, 0
    return SweepResult(alpha, beta, a, mu, cfg.lam, cfg.q, outcome, max_u, exponent, iterations)


def _run_point_args(args):
    return run_point(*args)


def sweep(cfg: SweepConfig, *, jobs: int = 1) -> list[SweepResult]:
    """One result per grid point, ordered by (α, β, a, μ).

    Points are independent; with ``jobs > 1`` they run in worker processes
    and are merged back in grid order.
    """
    points = cfg.points()
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point_args, [(cfg, p) for p in points]))
    else:
        results = [run_point(cfg, p) for p in points]
    return sorted(results, key=lambda r: r.key)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.12g}"


def results_to_csv(results: list[SweepResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results:
        row = r.row()
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _json_value(v):
    if v is None or isinstance(v, (str, bool)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return float(f"{v:.12g}") if math.isfinite(v) else str(v)


def results_to_json(results: list[SweepResult]) -> str:
    rows = [{k: _json_value(v) for k, v in r.row().items()} for r in results]
    return json.dumps(rows, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------


class NoThresholdError(ValueError):
    """The outcome does not change across the requested range."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


class MonotonicityError(RuntimeError):
    """Outcomes along the bisection are not ordered as the theory requires."""


@dataclass
class ThresholdEstimate:
    parameter: str
    lo: float
    hi: float
    lo_outcome: str
    hi_outcome: str
    iterations: int
    trace: list[tuple[float, str]]
    resolved: bool = True

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("bracket must satisfy lo < hi")
        if self.lo_outcome == self.hi_outcome:
            raise ValueError("bracket endpoints must have different outcomes")

    @property
    def width(self) -> float:
        return self.hi / self.lo - 1.0

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        out = asdict(self)
        out["trace"] = [[_json_value(v), o] for v, o in self.trace]
        return out


def _check_monotone(trace, low: str, high: str):
    seen_high = False
    for _, outcome in sorted(trace):
        if outcome == high:
            seen_high = True
        elif outcome == low and seen_high:
            raise MonotonicityError(f"outcome trace is not monotone: {sorted(trace)}")


def bisect_outcome(outcome_fn, lo: float, hi: float, *, low: str, high: str, rtol: float, parameter: str, max_steps: int = 40) -> ThresholdEstimate:
    """Geometric bisection on a two-valued outcome.

    ``low`` is the outcome expected at ``lo`` and ``high`` at ``hi``.  An
    indeterminate midpoint is replaced by the two quarter points; if both
    are indeterminate too the bracket is returned unresolved.
    """
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    trace = []

    def ev(x):
        o = outcome_fn(x)
        trace.append((float(x), o))
        return o

    o_lo, o_hi = ev(lo), ev(hi)
    if o_lo == o_hi:
        raise NoThresholdError(f"outcome {o_lo} at both ends of [{lo:g}, {hi:g}]", trace)
    if (o_lo, o_hi) != (low, high):
        raise NoThresholdError(f"expected {low} at {lo:g} and {high} at {hi:g}, got {o_lo} and {o_hi}", trace)
    resolved = True
    steps = 0
    while hi / lo - 1.0 > rtol and steps < max_steps:
        steps += 1
        mid = math.sqrt(lo * hi)
        o = ev(mid)
        if o == low:
            lo = mid
            continue
        if o == high:
            hi = mid
            continue
        moved = False
        for x in (lo * (hi / lo) ** 0.25, lo * (hi / lo) ** 0.75):
            o = ev(x)
            if o == high and x < hi:
                hi, moved = x, True
            elif o == low and x > lo:
                lo, moved = x, True
        if not moved:
            resolved = False
            break
    _check_monotone(trace, low, high)
    return ThresholdEstimate(parameter, lo, hi, low, high, steps, trace, resolved and hi / lo - 1.0 <= rtol)


def estimate_mu_star(template: ProblemSpec, mu_lo: float, mu_hi: float, *, rtol: float = 0.05, tol: float = 1e-10) -> ThresholdEstimate:
    """Bracket μ* for (P)⁻: solutions below, none above.

    Raises NoThresholdError when the solver converges across the whole range
    (the a <= 1 cases, where solutions exist for every μ).
    """
    if template.sign != "minus":
        raise DomainError("μ* is defined for (P)-")

    def outcome(mu):
        return solve_point(replace(template, mu=mu), tol=tol).outcome

    return bisect_outcome(outcome, mu_lo, mu_hi, low=CONVERGED, high=NONEXISTENCE, rtol=rtol, parameter="mu")


def estimate_lambda_star(template: ProblemSpec, lam_lo: float, lam_hi: float, *, rtol: float = 0.05, tol: float = 1e-10) -> ThresholdEstimate:
    """Bracket λ* for (P)⁺: no solution below, solutions above."""
    if template.sign != "plus":
        raise DomainError("λ* is defined for (P)+")
    if template.mu not in (-1.0, 1.0) or (template.mu == 1.0 and not template.a < 1):
        raise DomainError("λ* is estimated for μ = -1, or μ = +1 with a < 1")

    def outcome(lam):
        return solve_point(replace(template, lam=lam), tol=tol).outcome

    return bisect_outcome(outcome, lam_lo, lam_hi, low=NONEXISTENCE, high=CONVERGED, rtol=rtol, parameter="lambda")


def estimate_linear_threshold(template: ProblemSpec, lam_lo: float, lam_hi: float, *, rtol: float = 0.02) -> ThresholdEstimate:
    """Bracket the largest λ with a solution of -Δu = p g(u) + λu + μ|∇u|^a."""
    if template.sign != "minus" or template.f.kind != "linear":
        raise DomainError("needs (P)- with a linear source")
    if not (0.0 < template.a < 1.0) or template.mu < 0:
        raise DomainError("needs 0 < a < 1 and mu >= 0")
    nodes = refined_nodes(template.geometry, 0)

    def outcome(lam):
        _, rep = solve_linear_source(replace(template, lam=lam), nodes)
        if rep.status in (CONVERGED, NONEXISTENCE):
            return rep.status
        return INDETERMINATE

    return bisect_outcome(outcome, lam_lo, lam_hi, low=CONVERGED, high=NONEXISTENCE, rtol=rtol, parameter="lambda")


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

EXIT_OK, EXIT_USAGE, EXIT_NONEXISTENCE, EXIT_INDETERMINATE = 0, 1, 2, 3
SECTIONS = ("sweep", "threshold", "transform", "verify", "solver")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _status_code(status: str) -> int:
    if status == CONVERGED:
        return EXIT_OK
    if status == NONEXISTENCE:
        return EXIT_NONEXISTENCE
    return EXIT_INDETERMINATE


def _verdict_dict(v) -> dict:
    return {k: _json_value(x) for k, x in asdict(v).items()}


def _profile_csv(columns, arrays) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in zip(*arrays):
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _profile_json(columns, arrays) -> str:
    return json.dumps([{c: _json_value(x) for c, x in zip(columns, row)} for row in zip(*arrays)], indent=2) + "\n"


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


class _Context:
    def __init__(self, args):
        self.args = args
        if args.config is None:
            raise UsageError("--config is required")
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        self.sections = {k: dict(cfg.pop(k, {})) for k in SECTIONS}
        self.raw = cfg
        solver = self.sections["solver"]
        self.tol = args.tol if args.tol is not None else float(solver.get("tol", 1e-10))
        self.max_iter = args.max_iter if args.max_iter is not None else int(solver.get("max_iter", 100))
        self.out = None if args.out is None else Path(args.out)
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def spec(self) -> ProblemSpec:
        try:
            return spec_from_dict(self.raw)
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"bad problem config: {exc}") from exc

    def emit(self, name: str, text: str):
        if self.out is None:
            sys.stdout.write(text)
        else:
            (self.out / name).write_text(text)

    def emit_table(self, stem: str, columns, arrays, report: dict | None = None):
        if self.args.format == "json":
            self.emit(f"{stem}.json", _profile_json(columns, arrays))
        else:
            self.emit(f"{stem}.csv", _profile_csv(columns, arrays))
        if report is not None:
            if self.out is None:
                sys.stderr.write(json.dumps(report) + "\n")
            else:
                (self.out / "report.json").write_text(_dumps(report))


def cmd_check_conditions(ctx: _Context) -> int:
    spec = ctx.spec()
    w, g = spec.weight, spec.g
    lambda1 = eigenpair(spec.geometry).lambda1
    out = {
        "pg_integral": _verdict_dict(check_pg_integrable(w, g)),
        "tp_integral": _verdict_dict(check_tp_integrable(w)),
        "keller_osserman": _verdict_dict(check_keller_osserman(w, g)),
        "lambda1": lambda1,
        "existence": classify_existence(spec, lambda1),
    }
    if w.alpha is not None and g.beta is not None:
        out["regime"] = _verdict_dict(classify_regime(w.alpha, g.beta))
    ctx.emit("conditions.json", _dumps(out))
    return EXIT_NONEXISTENCE if out["existence"] == "nonexistent" else EXIT_OK


def cmd_transform(ctx: _Context) -> int:
    spec = ctx.spec()
    opts = ctx.sections["transform"]
    try:
        table = build_transform(spec.weight, spec.g, float(opts.get("h_max", 1.0)))
    except DomainError as exc:
        ctx.emit("report.json", _dumps({"status": NONEXISTENCE, "message": str(exc)}))
        return EXIT_NONEXISTENCE
    y_min = float(opts.get("y_min", 0.01))
    y = np.geomspace(min(y_min, table.psi_max), table.psi_max, int(opts.get("n_points", 200)))
    h, dh = eval_h(table, y)
    rep = verify_transform(table, tol=ctx.args.tol if ctx.args.tol is not None else 1e-4)
    ctx.emit_table("transform", ("y", "h", "dh"), (y, h, dh), rep.to_dict())
    return _status_code(rep.status)


def cmd_solve_bvp(ctx: _Context) -> int:
    spec = ctx.spec()
    tol = ctx.args.tol if ctx.args.tol is not None else 1e-8
    H, rep = solve_taliaferro(spec.weight, spec.g, tol)
    if H is None:
        ctx.emit("report.json", _dumps(rep.to_dict()))
        return _status_code(rep.status)
    ctx.emit_table("bvp", ("t", "H", "dH"), (H.nodes, H.values, H.derivative), rep.to_dict())
    return _status_code(rep.status)


def _profile(u: GridFunction):
    du = u.derivative if u.derivative is not None else central_derivative(u.nodes, u.values)
    return u.nodes, u.values, du


def cmd_solve_radial(ctx: _Context) -> int:
    spec = ctx.spec()
    res = solve_point(spec, tol=ctx.tol, max_iter=ctx.max_iter)
    report = res.report.to_dict()
    report["outcome"] = res.outcome
    report["mesh_level"] = res.level
    if res.solution is None:
        ctx.emit("report.json", _dumps(report))
    else:
        ctx.emit_table("solution", ("r", "u", "du"), _profile(res.solution), report)
    return _status_code(res.outcome)


def cmd_verify_candidate(ctx: _Context) -> int:
    spec = ctx.spec()
    opts = ctx.sections["verify"]
    fraction = float(opts.get("fraction", 0.1))
    if spec.sign == "plus":
        cand, expected = plus_subsolution(spec, fraction=fraction), SUB
    else:
        cand, expected = minus_supersolution(spec, fraction=fraction), SUPER
    tol = ctx.args.tol if ctx.args.tol is not None else 1e-4
    cls = residual_classify(cand.u, spec, tol=tol)
    out = {
        "expected": expected,
        "classification": _verdict_dict(cls),
        "constants": {k: _json_value(v) for k, v in cand.constants.items() if isinstance(v, (int, float, np.number))},
    }
    ctx.emit("verify.json", _dumps(out))
    return EXIT_OK if cls.verdict in (expected, SOLUTION) else EXIT_INDETERMINATE


def cmd_fit_asymptotics(ctx: _Context) -> int:
    spec = ctx.spec()
    if spec.weight.alpha is None or spec.g.beta is None:
        raise UsageError("fit-asymptotics needs power data")
    regime = classify_regime(spec.weight.alpha, spec.g.beta)
    if regime.regime == NONEXISTENT:
        ctx.emit("fit.json", _dumps({"regime": _verdict_dict(regime), "outcome": NONEXISTENCE}))
        return EXIT_NONEXISTENCE
    res = solve_point(spec, tol=ctx.tol, max_iter=ctx.max_iter)
    out = {"regime": _verdict_dict(regime), "outcome": res.outcome}
    if res.solution is not None:
        fit = fit_boundary_asymptotics(res.solution, spec.geometry, regime)
        out["fit"] = _verdict_dict(fit)
        out["fit"]["band_ratio"] = _json_value(fit.band_ratio)
    ctx.emit("fit.json", _dumps(out))
    return _status_code(res.outcome)


def _floats(v) -> tuple[float, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return (float(v),)


def cmd_sweep(ctx: _Context) -> int:
    spec = ctx.spec()
    grid = ctx.sections["sweep"]
    raw = ctx.raw
    try:
        cfg = SweepConfig(
            alphas=_floats(grid.get("alpha", raw.get("alpha", 0.0))),
            betas=_floats(grid.get("beta", raw["beta"])),
            a_values=_floats(grid.get("a", spec.a)),
            mus=_floats(grid.get("mu", spec.mu)),
            lam=spec.lam,
            q=raw.get("q"),
            sign=spec.sign,
            geometry=spec.geometry,
            tol=ctx.tol,
            max_iter=ctx.max_iter,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad sweep config: {exc}") from exc
    results = sweep(cfg, jobs=ctx.args.jobs)
    if ctx.args.format == "json":
        ctx.emit("sweep.json", results_to_json(results))
    else:
        ctx.emit("sweep.csv", results_to_csv(results))
    return EXIT_OK


def cmd_estimate_threshold(ctx: _Context) -> int:
    spec = ctx.spec()
    opts = ctx.sections["threshold"]
    kind = opts.get("kind", "lambda" if spec.sign == "plus" else "mu")
    try:
        lo, hi = float(opts["lo"]), float(opts["hi"])
    except KeyError as exc:
        raise UsageError("[threshold] needs lo and hi") from exc
    kw = {"rtol": float(opts["rtol"])} if "rtol" in opts else {}
    try:
        if kind == "mu":
            est = estimate_mu_star(spec, lo, hi, tol=ctx.tol, **kw)
        elif kind == "lambda":
            est = estimate_lambda_star(spec, lo, hi, tol=ctx.tol, **kw)
        elif kind == "linear":
            est = estimate_linear_threshold(spec, lo, hi, **kw)
        else:
            raise UsageError(f"unknown threshold kind {kind!r}")
    except NoThresholdError as exc:
        out = {"threshold": None, "message": str(exc), "trace": [[_json_value(v), o] for v, o in exc.trace]}
        ctx.emit("threshold.json", _dumps(out))
        return EXIT_INDETERMINATE
    except MonotonicityError as exc:
        ctx.emit("threshold.json", _dumps({"threshold": None, "message": str(exc)}))
        return EXIT_INDETERMINATE
    ctx.emit("threshold.json", _dumps({"threshold": est.to_dict()}))
    return EXIT_OK if est.resolved else EXIT_INDETERMINATE


COMMANDS = {
    "check-conditions": (cmd_check_conditions, "integrability verdicts, regime and predicted existence"),
    "transform": (cmd_transform, "tabulate (y, h, h') and check h'' = Φ(h)"),
    "solve-bvp": (cmd_solve_bvp, "solve H'' = -p g(H) on (0, 1)"),
    "solve-radial": (cmd_solve_radial, "solve the configured problem on its geometry"),
    "verify-candidate": (cmd_verify_candidate, "build and classify the explicit comparison function"),
    "fit-asymptotics": (cmd_fit_asymptotics, "solve and fit the boundary rate"),
    "sweep": (cmd_sweep, "existence map over (alpha, beta, a, mu)"),
    "estimate-threshold": (cmd_estimate_threshold, "bracket λ*, μ* or the linear threshold"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="singconv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML file with problem keys and optional sections")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ctx = _Context(args)
        return COMMANDS[args.command][0](ctx)
    except UsageError as exc:
        sys.stderr.write(f"singconv {args.command}: {exc}\n")
        return EXIT_USAGE
    except DomainError as exc:
        sys.stderr.write(f"singconv {args.command}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
