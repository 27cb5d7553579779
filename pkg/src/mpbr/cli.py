"""Command-line front end.

Subcommands: fit, diagnose, bootstrap, simulate, group-effects. Inputs are
wide CSV files (header ``sample_id,<method1>,...``); outputs are JSON or CSV
with floats rendered at 17 significant digits, so identical inputs, flags
and seeds produce byte-identical files. Exit codes: 0 ok, 2 input/usage
error, 3 numerical/estimation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .diagnostics import bland_altman_data, group_effects, kendall_matrix, parameter_scatter
from .errors import DataError, MethodComparisonError
from .estimators import EstimatorSpec, fit
from .geometry import SolverConfig
from .inference import BootstrapConfig, SimSpec, bootstrap, simulate
from .model import (
    FitResult,
    InterceptVector,
    MeasurementMatrix,
    MethodMeta,
    ScalingVector,
    pair_intercepts,
    pair_slopes,
)


# ---------------------------------------------------------------------------
# deterministic serialisation

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite number in output: {value!r}")
    return format(value, ".17g")


def _json_text(obj, indent: int = 0) -> str:
    """Stable JSON: insertion-ordered keys, floats at 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {_json_text(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            return "[" + ", ".join(_json_text(v, indent + 1) for v in items) + "]"
        parts = [f"{inner}{_json_text(v, indent + 1)}" for v in items]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _fmt(obj)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(c) if isinstance(c, (int, float, np.floating, np.integer)) else c for c in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "wb") as handle:
            handle.write(text.encode("utf-8"))
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# input parsing

def _read_measurements(path: str, reference: str | None) -> MeasurementMatrix:
    """Parse a wide CSV; rows with empty or non-numeric cells are rejected
    with a warning and the fit proceeds on the remainder (>= 3 rows)."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if row]
    if not rows:
        raise DataError(f"{path}: empty input")
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 3 or header[0] != "sample_id":
        raise DataError(
            f"{path}: header must be 'sample_id,<method1>,<method2>,...', got {header!r}"
        )
    methods = header[1:]
    if len(set(methods)) != len(methods):
        raise DataError(f"{path}: duplicate method names in header")

    kept_ids, kept_values, rejected = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        cells = [cell.strip() for cell in row]
        sample_id = cells[0] if cells else f"row {lineno}"
        if len(cells) != len(header):
            rejected.append((sample_id, f"expected {len(header)} cells, got {len(cells)}"))
            continue
        parsed = []
        bad = None
        for name, cell in zip(methods, cells[1:]):
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                bad = f"non-numeric value {cell!r} in column {name!r}"
                break
            parsed.append(value)
        if bad:
            rejected.append((sample_id, bad))
            continue
        kept_ids.append(sample_id)
        kept_values.append(parsed)

    if rejected:
        ids = ", ".join(repr(s) for s, _ in rejected)
        sys.stderr.write(f"warning: skipped {len(rejected)} incomplete row(s): {ids}\n")
        for sample_id, reason in rejected:
            sys.stderr.write(f"warning:   {sample_id!r}: {reason}\n")
    if len(kept_values) < 3:
        raise DataError(
            f"{path}: only {len(kept_values)} usable rows after rejecting incomplete ones; need >= 3"
        )
    data = MeasurementMatrix(np.array(kept_values), tuple(kept_ids), tuple(methods))
    if reference is not None:
        if reference not in data.method_names:
            raise DataError(f"unknown reference method {reference!r}; have {list(data.method_names)}")
        order = [reference] + [m for m in data.method_names if m != reference]
        data = data.reorder_methods(order)
    return data


def _read_fit_json(path: str) -> FitResult:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    try:
        return FitResult(
            b=ScalingVector(np.array(doc["b"], dtype=float)),
            a=InterceptVector(np.array(doc["a"], dtype=float)),
            r_hat=np.array(doc["r"], dtype=float),
            residuals=np.array(doc["residuals"], dtype=float),
            estimator=doc["estimator"],
            converged=bool(doc["converged"]),
            iterations=int(doc["iterations"]),
            fixed_point_residual=float(doc["fixed_point_residual"]),
            method_names=tuple(doc["methods"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a fit document: {exc}") from exc


def _read_meta(path: str) -> MethodMeta:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if row]
    if not rows or rows[0][0].strip() != "method_name" or len(rows[0]) < 2:
        raise DataError(f"{path}: header must be 'method_name,<factor1>,...'")
    factors = [c.strip() for c in rows[0][1:]]
    levels = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {len(rows[0])}")
        levels[row[0].strip()] = dict(zip(factors, (c.strip() for c in row[1:])))
    return MethodMeta(levels)


def _parse_floats(text: str, flag: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")], dtype=float)
    except ValueError as exc:
        raise DataError(f"{flag} expects a comma-separated list of numbers, got {text!r}") from exc


def _solver_from_args(args) -> SolverConfig:
    kwargs = {}
    if args.max_iter is not None:
        kwargs["max_iterations"] = args.max_iter
    if args.tol is not None:
        # --tol tightens/loosens the fixed-point criterion; the iterate-change
        # criterion follows two orders tighter.
        kwargs["fixed_point_tolerance"] = args.tol
        kwargs["rel_tolerance"] = args.tol * 1e-2
    return SolverConfig(**kwargs)


def _spec_from_args(args, data: MeasurementMatrix) -> EstimatorSpec:
    if args.method == "pbr2" and data.n_methods != 2:
        raise DataError("pbr2 requires exactly 2 methods")
    return EstimatorSpec(
        kind=args.method,
        with_intercept=not args.no_intercept,
        solver=_solver_from_args(args),
    )


# ---------------------------------------------------------------------------
# documents

def _fit_document(result: FitResult, args) -> dict:
    return {
        "methods": list(result.method_names),
        "estimator": result.estimator,
        "with_intercept": not args.no_intercept,
        "b": result.b.b,
        "a": result.a.a,
        "r": result.r_hat,
        "residuals": result.residuals,
        "converged": result.converged,
        "iterations": result.iterations,
        "fixed_point_residual": result.fixed_point_residual,
        "pair_slopes": pair_slopes(result.b),
        "pair_intercepts": pair_intercepts(result.a, result.b),
        "config": {
            "method": args.method,
            "with_intercept": not args.no_intercept,
            "reference": args.reference,
            "max_iterations": args.max_iter if args.max_iter is not None else SolverConfig().max_iterations,
            "rel_tolerance": _solver_from_args(args).rel_tolerance,
            "fixed_point_tolerance": _solver_from_args(args).fixed_point_tolerance,
            "degeneracy_epsilon": SolverConfig().degeneracy_epsilon,
            "seed": args.seed,
        },
    }


# ---------------------------------------------------------------------------
# subcommands

def _cmd_fit(args) -> int:
    if (args.format or "json") == "csv":
        raise DataError("fit emits a single JSON document; use --format json")
    data = _read_measurements(args.input, args.reference)
    result = fit(data, _spec_from_args(args, data))
    _emit(_json_text(_fit_document(result, args)) + "\n", args.out)
    return 0


def _cmd_diagnose(args) -> int:
    data = _read_measurements(args.input, None)
    result = _read_fit_json(args.fit)

    points = bland_altman_data(data, result)
    ba_rows = [
        (p.sample_id, p.method_name, p.mean, p.standardized_residual,
         "" if math.isnan(p.residual_ratio) else _fmt(p.residual_ratio))
        for p in points
    ]
    ba_text = _csv_text(
        ["sample_id", "method", "mean", "standardized_residual", "residual_ratio"], ba_rows
    )

    tau = kendall_matrix(data)
    tau_rows = [(name, *tau[mu]) for mu, name in enumerate(data.method_names)]
    tau_text = _csv_text(["method", *data.method_names], tau_rows)

    scatter_text = _csv_text(["method", "b", "a"], parameter_scatter(result))

    prefix = args.out or "diagnostics"
    _emit(ba_text, f"{prefix}_bland_altman.csv")
    _emit(tau_text, f"{prefix}_kendall.csv")
    _emit(scatter_text, f"{prefix}_parameters.csv")
    return 0


def _cmd_bootstrap(args) -> int:
    data = _read_measurements(args.input, args.reference)
    spec = _spec_from_args(args, data)
    config = BootstrapConfig(
        replicates=args.replicates,
        seed=args.seed if args.seed is not None else 0,
        level=args.level,
        estimator=spec,
    )
    result = bootstrap(data, config)
    point_slopes = pair_slopes(result.point.b)
    point_intercepts = pair_intercepts(result.point.a, result.point.b)

    pairs = []
    names = result.method_names
    for mu in range(len(names)):
        for nu in range(len(names)):
            if mu == nu:
                continue
            pairs.append({
                "method_mu": names[mu],
                "method_nu": names[nu],
                "slope": point_slopes[mu, nu],
                "slope_low": result.slope_low[mu, nu],
                "slope_high": result.slope_high[mu, nu],
                "ln_slope_low": result.ln_slope_low[mu, nu],
                "ln_slope_high": result.ln_slope_high[mu, nu],
                "intercept": point_intercepts[mu, nu],
                "intercept_low": result.intercept_low[mu, nu],
                "intercept_high": result.intercept_high[mu, nu],
            })
    if (args.format or "json") == "csv":
        header = list(pairs[0].keys())
        text = _csv_text(header, [[p[k] for k in header] for p in pairs])
    else:
        doc = {
            "methods": list(names),
            "estimator": result.point.estimator,
            "replicates": result.replicates,
            "level": result.level,
            "seed": result.seed,
            "retries": result.n_retries,
            "pairs": pairs,
            "a": result.point.a.a,
            "a_low": result.a_low,
            "a_high": result.a_high,
        }
        text = _json_text(doc) + "\n"
    _emit(text, args.out)
    return 0


def _cmd_simulate(args) -> int:
    if (args.format or "csv") == "json":
        raise DataError("simulate emits CSV so its output feeds straight into fit")
    beta = _parse_floats(args.beta, "--beta")
    alpha = _parse_floats(args.alpha, "--alpha") if args.alpha else np.zeros(beta.size)
    if args.r_values:
        r_values = _parse_floats(args.r_values, "--r-values")
    else:
        if args.n < 3:
            raise DataError("--n must be at least 3")
        r_values = np.linspace(args.r_min, args.r_max, args.n)
    names = tuple(args.method_names.split(",")) if args.method_names else None
    spec = SimSpec(
        beta=beta,
        alpha=alpha,
        r_values=r_values,
        noise_family=args.noise.replace("-", "_"),
        student_df=args.df,
        sigma=args.sigma,
        sigma_mode=args.sigma_mode,
        contamination_fraction=args.contamination_fraction,
        contamination_magnitude=args.contamination_magnitude,
        contamination_column=args.contamination_column,
        method_names=names,
    )
    data = simulate(spec, args.seed if args.seed is not None else 0)
    rows = [(sid, *data.values[i]) for i, sid in enumerate(data.sample_ids)]
    _emit(_csv_text(["sample_id", *data.method_names], rows), args.out)
    return 0


def _cmd_group_effects(args) -> int:
    result = _read_fit_json(args.fit)
    meta = _read_meta(args.meta)
    factors = [f.strip() for f in args.factors.split(",") if f.strip()]
    try:
        effects = group_effects(result, meta, factors)
    except KeyError as exc:
        raise DataError(str(exc)) from exc
    doc = {
        "methods": list(result.method_names),
        "factors": [
            {
                "factor": t.factor,
                "level": t.level,
                "slope_ratio": t.slope_ratio,
                "log_slope_effect": t.log_slope_effect,
                "intercept_shift": t.intercept_shift,
            }
            for t in effects.terms
        ],
        "design_columns": list(effects.design_columns),
        "slope_residual_rms": effects.slope_residual_rms,
        "intercept_residual_rms": effects.intercept_residual_rms,
    }
    _emit(_json_text(doc) + "\n", args.out)
    return 0


# ---------------------------------------------------------------------------
# parser / entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpbr",
        description="Multivariate Passing-Bablok regression and companions for method comparison.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # Parents share action objects across subparsers, so the shared flags
    # default to None here and each command resolves its own default.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--seed", type=int, default=None)

    estimator = argparse.ArgumentParser(add_help=False)
    estimator.add_argument("--method", choices=("mpbr", "mrmr", "mmar", "pbr2"), default="mpbr")
    estimator.add_argument("--no-intercept", action="store_true",
                           help="fit the zero-intercept model")
    estimator.add_argument("--tol", type=float, default=None,
                           help="fixed-point tolerance of the solver")
    estimator.add_argument("--max-iter", type=int, default=None)
    estimator.add_argument("--reference", default=None,
                           help="method fixed to slope 1 (default: first data column)")

    p_fit = sub.add_parser("fit", parents=[common, estimator],
                           help="fit a scaling/intercept model to a CSV of readings")
    p_fit.add_argument("input")
    p_fit.set_defaults(func=_cmd_fit)

    p_diag = sub.add_parser("diagnose", parents=[common],
                            help="emit agreement, rank-correlation and parameter tables")
    p_diag.add_argument("input")
    p_diag.add_argument("--fit", required=True, help="fit JSON produced by the fit subcommand")
    p_diag.set_defaults(func=_cmd_diagnose)

    p_boot = sub.add_parser("bootstrap", parents=[common, estimator],
                            help="percentile bootstrap intervals for slopes and intercepts")
    p_boot.add_argument("input")
    p_boot.add_argument("--replicates", "--B", dest="replicates", type=int, default=999)
    p_boot.add_argument("--level", type=float, default=0.95)
    p_boot.set_defaults(func=_cmd_bootstrap)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="draw a synthetic dataset from the linear model")
    p_sim.add_argument("--beta", required=True, help="comma-separated slopes, e.g. 1,2,0.5")
    p_sim.add_argument("--alpha", default=None, help="comma-separated intercepts (default zeros)")
    p_sim.add_argument("--n", type=int, default=50)
    p_sim.add_argument("--r-min", type=float, default=1.0)
    p_sim.add_argument("--r-max", type=float, default=10.0)
    p_sim.add_argument("--r-values", default=None, help="explicit latent values (overrides --n)")
    p_sim.add_argument("--noise", choices=("gaussian", "laplace", "student-t"), default="gaussian")
    p_sim.add_argument("--df", type=float, default=None, help="degrees of freedom for student-t")
    p_sim.add_argument("--sigma", type=float, default=0.0)
    p_sim.add_argument("--sigma-mode", choices=("constant", "proportional"), default="constant")
    p_sim.add_argument("--contamination-fraction", type=float, default=0.0)
    p_sim.add_argument("--contamination-magnitude", type=float, default=100.0)
    p_sim.add_argument("--contamination-column", type=int, default=None)
    p_sim.add_argument("--method-names", default=None)
    p_sim.set_defaults(func=_cmd_simulate)

    p_group = sub.add_parser("group-effects", parents=[common],
                             help="regress fitted parameters on method-level factors")
    p_group.add_argument("--fit", required=True)
    p_group.add_argument("--meta", required=True, help="CSV: method_name,<factor1>,...")
    p_group.add_argument("--factors", required=True, help="comma-separated factor names")
    p_group.set_defaults(func=_cmd_group_effects)

    return parser


def _report_error(exc: MethodComparisonError) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(_json_text(doc) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except DataError as exc:
        _report_error(exc)
        return 2
    except MethodComparisonError as exc:
        _report_error(exc)
        return 3


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
