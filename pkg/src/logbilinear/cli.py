"""Command-line interface: ``logbilinear <command> [options]``.

Exit codes: 0 success, 1 domain or convergence error, 2 usage error
(including a missing input file).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .asycov import AGREEMENT_TOL, covariance_bundle, sigma_theta_projection
from .bridge import (
    LinearBridgeInput,
    beta_from_theta_linear,
    beta_from_theta_loglinear,
    theta_from_beta_linear,
    theta_from_beta_mvlinear,
)
from .design import ContingencyTable, SchemeSpec, build_model_matrices, check_identifiability
from .errors import LogBilinearError
from .fit import FIT_TOL, expected_table, fit_loglinear
from .power import HypothesisSpec, PowerRequest, power_analysis, power_curve, required_sample_size
from .simulate import SimulationConfig, monte_carlo_cov

OUTPUT_DIR_ENV = "LOGBILINEAR_OUTPUT_DIR"
DEVIATION_FLOOR = 1e-14


class UsageError(Exception):
    pass


# -- argument parsing ---------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o", help="write to this file instead of standard output")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None, help="convergence tolerance for model fitting")


def _table_args(p, required=True):
    p.add_argument("--table", required=required, help="table CSV")
    p.add_argument("--design", required=required, help="design JSON")
    p.add_argument("--reference", help="ROW,COL labels of the reference levels")


def _alternative_args(p):
    p.add_argument("--design", required=True)
    p.add_argument("--theta-prime", required=True)
    p.add_argument("--marginals", required=True)
    p.add_argument("--scheme", choices=("M", "MR", "MC"), default="M")
    p.add_argument("--q", help="hypothesis JSON; default tests every entry of theta")
    p.add_argument("--alpha", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logbilinear", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the association model to a table")
    _table_args(p)
    _common(p)

    p = sub.add_parser("cov", help="asymptotic covariance of the association estimate")
    _table_args(p)
    p.add_argument("--scheme", choices=("M", "P", "MR", "MC"), default="M")
    p.add_argument("--all-representations", action="store_true")
    _common(p)

    p = sub.add_parser("power", help="asymptotic power of the Wald test")
    _alternative_args(p)
    p.add_argument("--n", type=float, help="total sample size")
    p.add_argument("--curve", help="comma-separated sample sizes; emits a power curve")
    _common(p)

    p = sub.add_parser("samplesize", help="smallest n reaching a target power")
    _alternative_args(p)
    p.add_argument("--target-power", type=float, required=True)
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo check of the asymptotic covariance")
    _alternative_args(p)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dump-theta", help="write every replicate's estimate to this CSV")
    _common(p)

    p = sub.add_parser("bridge", help="convert between regression coefficients and theta")
    p.add_argument("kind", choices=("linear", "linear-inverse", "mvlinear", "loglinear"))
    p.add_argument("--beta", help="JSON vector or matrix")
    p.add_argument("--theta", help="JSON vector")
    p.add_argument("--sigma-y2", type=float)
    p.add_argument("--cov-x", help="JSON matrix")
    p.add_argument("--cov-y", help="JSON matrix")
    _common(p)

    p = sub.add_parser("check", help="validate inputs without estimating anything")
    _table_args(p, required=False)
    p.add_argument("--theta-prime")
    p.add_argument("--marginals")
    p.add_argument("--q")
    _common(p)
    return parser


# -- shared helpers -----------------------------------------------------------

def _reorder(labels, wanted: str, axis: str) -> list[int]:
    if wanted not in labels:
        raise UsageError(f"reference {axis} label {wanted!r} not found; labels are {list(labels)}")
    first = labels.index(wanted)
    return [first] + [i for i in range(len(labels)) if i != first]


def _load_table_design(args):
    table = io.read_table(args.table)
    design = io.read_design(args.design)
    row_order = col_order = None
    if args.reference:
        parts = args.reference.split(",")
        if len(parts) != 2:
            raise UsageError("--reference expects ROW,COL")
        row_order = _reorder(list(table.row_labels), parts[0].strip(), "row")
        col_order = _reorder(list(table.col_labels), parts[1].strip(), "column")
        table = ContingencyTable(
            table.cells[np.ix_(row_order, col_order)],
            tuple(table.row_labels[i] for i in row_order),
            tuple(table.col_labels[i] for i in col_order),
        )
    spec = design.spec(row_order, col_order)
    return table, spec


def _hypothesis(args, length: int) -> HypothesisSpec:
    q, alpha = (np.eye(length), None) if not args.q else io.read_hypothesis(args.q)
    if args.alpha is not None:
        alpha = args.alpha
    return HypothesisSpec(q, 0.05 if alpha is None else alpha)


def _request(args, **extra) -> tuple:
    spec = io.read_design(args.design).spec()
    theta = io.read_theta(args.theta_prime)
    marg = io.read_marginals(args.marginals)
    req = PowerRequest(theta, marg["row"], marg["col"], args.scheme, marg.get("proportions"), **extra)
    mm = build_model_matrices(spec)
    return req, _hypothesis(args, theta.size), mm, spec


def _labels(table: ContingencyTable) -> dict:
    return {"row_labels": list(table.row_labels or ()), "col_labels": list(table.col_labels or ())}


# -- commands -----------------------------------------------------------------

def cmd_fit(args) -> dict:
    table, spec = _load_table_design(args)
    mm = build_model_matrices(spec)
    fit = fit_loglinear(table, mm, tol=args.tol or FIT_TOL)
    sigma = sigma_theta_projection(fit.mu_hat, mm)
    var = np.diag(sigma)
    shape = fit.theta_hat.shape
    return {
        "command": "fit",
        **_labels(table),
        "theta_hat": fit.theta_hat,
        "variance": var.reshape(shape, order="F"),
        "std_error": np.sqrt(var).reshape(shape, order="F"),
        "sigma_theta": sigma,
        "alpha_hat": fit.alpha_hat,
        "rho_hat": fit.rho_hat,
        "gamma_hat": fit.gamma_hat,
        "mu_hat": fit.mu_hat.cells,
        "converged": fit.converged,
        "iterations": fit.iterations,
    }


def _deviation_bound(dev: float) -> float:
    # rounding noise differs between kernel backends; report a power-of-ten bound
    return float(10.0 ** math.ceil(math.log10(max(dev, DEVIATION_FLOOR))))


def cmd_cov(args) -> dict:
    table, spec = _load_table_design(args)
    mm = build_model_matrices(spec)
    fit = fit_loglinear(table, mm, tol=args.tol or FIT_TOL)
    scheme = SchemeSpec.matching(args.scheme, table)
    bundle = covariance_bundle(fit, mm, spec, scheme)
    out = {
        "command": "cov",
        **_labels(table),
        "scheme": args.scheme,
        "theta_hat": fit.theta_vec,
        "sigma_theta": bundle.sigma_theta,
        "sigma_lambda": bundle.sigma_lambda,
    }
    if args.all_representations:
        out["representations"] = bundle.routes()
        out["routes_agree"] = bundle.max_pairwise_deviation <= AGREEMENT_TOL
        out["max_pairwise_deviation_bound"] = _deviation_bound(bundle.max_pairwise_deviation)
    return out


def cmd_power(args) -> dict:
    if args.curve:
        sizes = [float(s) for s in args.curve.split(",") if s.strip()]
        req, hyp, mm, spec = _request(args)
        results = power_curve(req, hyp, mm, spec, sizes)
        return {
            "command": "power-curve",
            "scheme": args.scheme,
            "alpha": hyp.alpha,
            "df": hyp.df,
            "curve": [{"n": r.n, "power": r.power, "noncentrality": r.noncentrality} for r in results],
        }
    if args.n is None:
        raise UsageError("power needs --n or --curve")
    req, hyp, mm, spec = _request(args, n=args.n)
    res = power_analysis(req, hyp, mm, spec)
    return {"command": "power", "scheme": args.scheme, **res.to_dict()}


def cmd_samplesize(args) -> dict:
    req, hyp, mm, spec = _request(args, target_power=args.target_power)
    n = required_sample_size(req, hyp, mm, spec)
    curve = power_curve(req, hyp, mm, spec, [n - 1, n] if n > 1 else [n])
    return {
        "command": "samplesize",
        "scheme": args.scheme,
        "target_power": args.target_power,
        "alpha": hyp.alpha,
        "df": hyp.df,
        "n": n,
        "power_at_n": curve[-1].power,
        "power_below_n": curve[0].power if n > 1 else None,
    }


def cmd_simulate(args) -> dict:
    req, hyp, mm, spec = _request(args, n=args.n)
    res = power_analysis(req, hyp, mm, spec)
    p = res.p_prime.cells
    n = args.n
    if args.scheme == "M":
        scheme = SchemeSpec.multinomial(n)
    else:
        sizes = np.round(n * req.proportions)
        scheme = SchemeSpec.rows(sizes) if args.scheme == "MR" else SchemeSpec.cols(sizes)
    config = SimulationConfig(p, scheme, args.replications, args.seed)
    report = monte_carlo_cov(config, mm, spec, hypothesis=hyp, n_jobs=args.jobs, keep_draws=bool(args.dump_theta))
    if args.dump_theta:
        header = [f"theta_{i}" for i in range(report.theta_draws.shape[1])]
        _write(args.dump_theta, io.dumps_rows(header, report.theta_draws.tolist()))
    return {
        "command": "simulate",
        "scheme": scheme.to_dict(),
        "seed": args.seed,
        "expected_table": expected_table(p, scheme).cells,
        "asymptotic_power": res.power,
        **report.to_dict(),
    }


def _json_arg(text, name):
    if text is None:
        raise UsageError(f"--{name} is required for this conversion")
    try:
        return np.array(json.loads(text), dtype=float)
    except (json.JSONDecodeError, TypeError, ValueError):
        raise UsageError(f"--{name} must be a JSON number, vector or matrix") from None


def cmd_bridge(args) -> dict:
    out = {"command": "bridge", "kind": args.kind}
    if args.kind == "linear":
        if args.sigma_y2 is None:
            raise UsageError("--sigma-y2 is required")
        inp = LinearBridgeInput(_json_arg(args.beta, "beta"), args.sigma_y2, _json_arg(args.cov_x, "cov-x"))
        out.update(beta=inp.beta, theta=theta_from_beta_linear(inp), conditional_variance=inp.conditional_variance)
    elif args.kind == "linear-inverse":
        if args.sigma_y2 is None:
            raise UsageError("--sigma-y2 is required")
        theta = _json_arg(args.theta, "theta")
        out.update(theta=theta, beta=beta_from_theta_linear(theta, args.sigma_y2, _json_arg(args.cov_x, "cov-x")))
    elif args.kind == "mvlinear":
        beta = _json_arg(args.beta, "beta")
        out.update(beta=beta, theta=theta_from_beta_mvlinear(beta, _json_arg(args.cov_y, "cov-y"), _json_arg(args.cov_x, "cov-x")))
    else:
        theta = _json_arg(args.theta, "theta")
        out.update(theta=theta, beta=beta_from_theta_loglinear(theta))
    return out


def cmd_check(args) -> dict:
    checks = []

    def attempt(name, fn):
        try:
            detail = fn()
            checks.append({"name": name, "passed": True, **(detail or {})})
        except (LogBilinearError, UsageError, ValueError) as exc:
            checks.append({"name": name, "passed": False, "message": str(exc)})

    state = {}
    if args.table:
        def _table():
            state["table"] = io.read_table(args.table)
            return {"shape": list(state["table"].cells.shape)}
        attempt("table", _table)
    if args.design:
        def _design():
            state["design"] = io.read_design(args.design)
            spec = state["design"].spec()
            report = check_identifiability(spec, state.get("table"))
            if not report.passed:
                raise LogBilinearError("; ".join(report.failures))
            state["spec"] = spec
            return {"ranks": report.ranks}
        attempt("design", _design)
    if args.table and args.design and args.reference and "table" in state and "design" in state:
        attempt("reference", lambda: (_load_table_design(args), None)[1])
    if args.theta_prime:
        def _theta():
            theta = io.read_theta(args.theta_prime)
            spec = state.get("spec")
            if spec is not None and theta.shape != (spec.L_X, spec.L_Y):
                raise LogBilinearError(f"theta has shape {theta.shape}, design needs {(spec.L_X, spec.L_Y)}")
            state["theta"] = theta
        attempt("theta_prime", _theta)
    if args.marginals:
        def _marg():
            marg = io.read_marginals(args.marginals)
            PowerRequest(state.get("theta", np.zeros((1, 1))), marg["row"], marg["col"],
                         "M" if marg.get("proportions") is None else "MR", marg.get("proportions"))
            spec = state.get("spec")
            if spec is not None and (marg["row"].size, marg["col"].size) != (spec.J + 1, spec.K + 1):
                raise LogBilinearError("marginals do not match the design shape")
        attempt("marginals", _marg)
    if args.q:
        def _q():
            q, alpha = io.read_hypothesis(args.q)
            hyp = HypothesisSpec(q, 0.05 if alpha is None else alpha)
            spec = state.get("spec")
            if spec is not None and hyp.Q.shape[1] != spec.L:
                raise LogBilinearError(f"Q has {hyp.Q.shape[1]} columns, design has {spec.L} parameters")
        attempt("hypothesis", _q)
    if not checks:
        raise UsageError("check needs at least one input file")
    return {"command": "check", "passed": all(c["passed"] for c in checks), "checks": checks}


COMMANDS = {
    "fit": cmd_fit,
    "cov": cmd_cov,
    "power": cmd_power,
    "samplesize": cmd_samplesize,
    "simulate": cmd_simulate,
    "bridge": cmd_bridge,
    "check": cmd_check,
}


# -- driver -------------------------------------------------------------------

def _resolve(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = _resolve(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")


def _render(payload: dict, fmt: str) -> str:
    return io.dumps_json(payload) if fmt == "json" else io.dumps_csv(payload)


def _fail(args, code: int, kind: str, message: str) -> int:
    sys.stderr.write(f"logbilinear: error: {message}\n")
    if getattr(args, "format", "json") == "json":
        sys.stdout.write(io.dumps_json({"error": {"type": kind, "message": message, "exit_code": code}}))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        payload = COMMANDS[args.command](args)
    except io.InputFileError as exc:
        return _fail(args, 2 if exc.missing else 1, type(exc).__name__, str(exc))
    except UsageError as exc:
        return _fail(args, 2, "UsageError", str(exc))
    except LogBilinearError as exc:
        return _fail(args, 1, type(exc).__name__, str(exc))
    _write(args.output, _render(payload, args.format))
    if args.command == "check" and not payload["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
