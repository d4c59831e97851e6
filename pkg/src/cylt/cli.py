"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 a fit did not
converge, 5 parameter constraint or precondition violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    circular_linear_correlation,
    cross_moment,
    find_modes,
    skewness_x,
    trig_moment,
)
from .dataset import Dataset, ParseError, read_csv, write_csv
from .exceptions import ConstraintError, DomainError, PreconditionError
from .fit import MODEL_TAGS, FitOptions, FitReport, fit_mle
from .gof import gof_ks
from .model import TWO_PI, CylinderParams, KSParams, log_pdf
from .sample import SamplerConfig, sample_joint
from .specfun import SeriesOptions

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NONCONVERGENCE = 4
EXIT_CONSTRAINT = 5

_MODEL_CHOICES = {"gt": "GT", "gt-sub1": "GT-sub1", "gt-sub2": "GT-sub2", "ks": "KS"}


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **obj}, sort_keys=True, indent=2) + "\n"


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_json(spec: str) -> dict:
    """Parse ``spec`` as inline JSON, or else read it as a JSON file path."""
    try:
        return json.loads(spec)
    except json.JSONDecodeError:
        pass
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"--params is neither valid JSON nor an existing file: {spec!r}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def load_params(spec: str):
    """Parameters from JSON; the output of ``cylt fit`` is accepted too.

    Angles in parameter files are always radians.
    """
    data = _load_json(spec)
    if isinstance(data.get("report"), dict):
        data = data["report"]
    if "params" in data and isinstance(data["params"], dict):
        data = data["params"]
    if "tau" in data:
        return KSParams.from_dict(data)
    missing = [k for k in ("alpha", "sigma") if k not in data]
    if missing:
        raise InputError(f"parameter set lacks {missing}")
    return CylinderParams.from_dict(data)


def _require_gt(p):
    if not isinstance(p, CylinderParams):
        raise InputError("this command needs generalized-t parameters (alpha, sigma, ...)")
    return p


def _series_options(args) -> SeriesOptions:
    return SeriesOptions(rel_tol=args.series_tol, max_terms=args.series_max_terms)


def _fit_options(args, compute_gof=True) -> FitOptions:
    return FitOptions(tol=args.tol, max_iter=args.max_iter, series=_series_options(args),
                      compute_gof=compute_gof)


def _angle(value: float, unit: str) -> float:
    return math.radians(value) if unit == "degrees" else value


def _gof_block(statistic: float | None) -> dict | None:
    if statistic is None:
        return None
    from .gof import gof_thresholds

    return {f"{k:g}": v for k, v in gof_thresholds(statistic).items()}


def _report_record(report: FitReport) -> dict:
    rec = report.as_dict()
    rec["gof_thresholds"] = _gof_block(report.gof_ks)
    return rec


def run_fit(args) -> int:
    data = read_csv(args.input, args.angle_unit)
    init = _require_gt(load_params(args.init)) if args.init else None
    report = fit_mle(data, _MODEL_CHOICES[args.model], init, _fit_options(args))
    _emit(_dump({"command": "fit", "n": data.n, "report": _report_record(report)}), args.output)
    return EXIT_OK if report.converged else EXIT_NONCONVERGENCE


def compare_models(data: Dataset, opts: FitOptions) -> list[dict]:
    """Fit every model; failures become records with an ``error`` field."""
    records = []
    for tag in MODEL_TAGS:
        try:
            records.append(_report_record(fit_mle(data, tag, None, opts)))
        except Exception as exc:  # one failing model must not hide the others
            records.append({"model_tag": tag, "error": f"{type(exc).__name__}: {exc}"})
    fitted = [r for r in records if "aic" in r]
    best = min(fitted, key=lambda r: r["aic"])["model_tag"] if fitted else None
    for r in records:
        r["aic_min"] = r["model_tag"] == best
    return records


def format_table(records: list[dict]) -> str:
    """Aligned text table: one column per model, one row per quantity."""
    names = ["alpha", "sigma", "mu", "lam", "nu", "kappa1", "mu1", "kappa2", "mu2",
             "tau", "kappa1_star", "kappa2_star"]
    rows = [["", *[r["model_tag"] + (" *" if r.get("aic_min") else "") for r in records]]]
    for name in names:
        if not any(name in r.get("params", {}) for r in records):
            continue
        rows.append([name, *[
            f"{r['params'][name]:.4f}" if name in r.get("params", {}) else "-" for r in records
        ]])
    for key, label in (("loglik", "max loglik"), ("aic", "AIC"), ("gof_ks", "g.o.f.")):
        rows.append([label, *[
            f"{r[key]:.3f}" if r.get(key) is not None else ("failed" if "error" in r else "-")
            for r in records
        ]])
    rows.append(["converged", *[str(r.get("converged", False)).lower() for r in records]])
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.append("* minimum AIC; g.o.f. critical values 0.362 (5%), 0.335 (10%), 0.292 (25%)")
    return "\n".join(lines) + "\n"


def run_compare(args) -> int:
    data = read_csv(args.input, args.angle_unit)
    records = compare_models(data, _fit_options(args))
    _emit(_dump({"command": "compare", "n": data.n, "models": records}), args.output)
    table = format_table(records)
    (sys.stdout if args.output else sys.stderr).write(table)
    ok = all(r.get("converged", False) for r in records)
    return EXIT_OK if ok else EXIT_NONCONVERGENCE


def run_pdf(args) -> int:
    p = _require_gt(load_params(args.params))
    theta = _angle(args.theta, args.angle_unit)
    lp = float(log_pdf(p, args.x, theta, _series_options(args)))
    _emit(_dump({"command": "pdf", "x": args.x, "theta": theta % TWO_PI,
                 "pdf": math.exp(lp), "logpdf": lp}), args.output)
    return EXIT_OK


def default_bounds(p: CylinderParams) -> tuple[float, float]:
    """``mu -/+ (lam + 6 sigma)``: the location sweeps ``mu +/- lam``."""
    half = p.lam + 6.0 * p.sigma
    return p.mu - half, p.mu + half


def grid_csv(p: CylinderParams, bounds, nx: int, ntheta: int, opts: SeriesOptions) -> str:
    """CSV text of ``x,theta,pdf,logpdf`` on a rectangular grid.

    ``x`` spans the closed bounds; ``theta`` covers ``[0, 2 pi)`` in equal steps.
    """
    if nx < 2 or ntheta < 2:
        raise InputError("grid resolution must be at least 2 per axis")
    xs = np.linspace(bounds[0], bounds[1], nx)
    ts = np.arange(ntheta) * (TWO_PI / ntheta)
    xx, tt = np.meshgrid(xs, ts, indexing="ij")
    lp = np.asarray(log_pdf(p, xx, tt, opts))
    lines = ["x,theta,pdf,logpdf"]
    for x, t, v in zip(xx.ravel().tolist(), tt.ravel().tolist(), lp.ravel().tolist()):
        lines.append(f"{x!r},{t!r},{math.exp(v)!r},{v!r}")
    return "\n".join(lines) + "\n"


def run_grid(args) -> int:
    p = _require_gt(load_params(args.params))
    bounds = tuple(args.bounds) if args.bounds else default_bounds(p)
    if not bounds[0] < bounds[1]:
        raise InputError("--bounds must satisfy XMIN < XMAX")
    res = args.grid_res
    nx, nt = (res[0], res[0]) if len(res) == 1 else (res[0], res[1])
    _emit(grid_csv(p, bounds, nx, nt, _series_options(args)), args.output)
    return EXIT_OK


def run_sample(args) -> int:
    p = _require_gt(load_params(args.params))
    data = sample_joint(p, args.n, SamplerConfig(seed=args.seed))
    _emit(write_csv(data), args.output)
    return EXIT_OK


def run_gof(args) -> int:
    data = read_csv(args.input, args.angle_unit)
    p = load_params(args.params)
    result = gof_ks(p, data, _series_options(args))
    _emit(_dump({"command": "gof", **result.as_dict()}), args.output)
    return EXIT_OK


def run_modes(args) -> int:
    p = _require_gt(load_params(args.params))
    ms = find_modes(p, args.method)
    _emit(_dump({
        "command": "modes",
        "classification": ms.classification,
        "method": ms.method,
        "boundary": ms.boundary,
        "modes": [{"x": x, "theta": t} for x, t in ms.modes],
    }), args.output)
    return EXIT_OK


def run_moments(args) -> int:
    p = _require_gt(load_params(args.params))
    opts = _series_options(args)
    tm = trig_moment(p, args.m, args.k, opts)
    out = {
        "command": "moments",
        "m": args.m,
        "k": args.k,
        "trig_cos": tm.cos_moment,
        "trig_sin": tm.sin_moment,
        "cross_cos": cross_moment(p, args.m, args.k, "cos", opts),
        "cross_sin": cross_moment(p, args.m, args.k, "sin", opts),
    }
    if p.alpha > 0:
        out["r2"] = circular_linear_correlation(p, opts)
    if p.alpha > 1:
        out["skewness_x"] = skewness_x(p, opts)
    _emit(_dump(out), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--angle-unit", choices=("radians", "degrees"), default="radians",
                        help="unit of angles in input data and --theta (default: radians)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--tol", type=float, default=1e-3,
                        help="fit stopping threshold on parameter change (default: 1e-3)")
    common.add_argument("--max-iter", type=int, default=500, help="fit cycle cap (default: 500)")
    common.add_argument("--series-tol", type=float, default=1e-12,
                        help="relative truncation threshold for series (default: 1e-12)")
    common.add_argument("--series-max-terms", type=int, default=500,
                        help="term cap for series (default: 500)")

    parser = argparse.ArgumentParser(
        prog="cylt", description="Generalized t-distribution on the cylinder.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, func, data=False, params=False):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if data:
            sp.add_argument("input", help="CSV file with columns x,theta")
        if params:
            sp.add_argument("--params", required=True,
                            help="parameters as inline JSON or a JSON file (angles in radians)")
        sp.set_defaults(func=func)
        return sp

    sp = add("fit", "fit one model by maximum likelihood", run_fit, data=True)
    sp.add_argument("--model", choices=sorted(_MODEL_CHOICES), default="gt")
    sp.add_argument("--init", help="starting parameters (JSON)")
    add("compare", "fit all four models and tabulate AIC and g.o.f.", run_compare, data=True)
    sp = add("pdf", "evaluate the joint density at one point", run_pdf, params=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp = add("grid", "write the density on a rectangular grid as CSV", run_grid, params=True)
    sp.add_argument("--bounds", type=float, nargs=2, metavar=("XMIN", "XMAX"))
    sp.add_argument("--grid-res", type=int, nargs="+", default=[200], metavar="N",
                    help="points per axis: N, or NX NTHETA (default: 200)")
    sp = add("sample", "draw a synthetic dataset", run_sample, params=True)
    sp.add_argument("-n", type=int, required=True, help="number of observations")
    add("gof", "bivariate Kolmogorov-Smirnov statistic of data under parameters", run_gof,
        data=True, params=True)
    sp = add("modes", "modes of the joint density", run_modes, params=True)
    sp.add_argument("--method", choices=("auto", "closed_form", "numeric"), default="auto")
    sp = add("moments", "trigonometric and cross moments, R^2 and skewness", run_moments,
             params=True)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--k", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "grid" and len(args.grid_res) > 2:
        parser.error("--grid-res takes one or two integers")
    if args.command == "sample" and args.n < 1:
        parser.error("-n must be a positive integer")
    try:
        return args.func(args)
    except (ParseError, InputError, OSError, json.JSONDecodeError) as exc:
        print(f"cylt: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConstraintError, DomainError, PreconditionError) as exc:
        print(f"cylt: error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT


if __name__ == "__main__":
    sys.exit(main())
