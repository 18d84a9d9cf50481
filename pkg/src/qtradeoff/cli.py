"""Command-line entry point ``qtradeoff``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Every number is
printed with 12 significant digits; INFINITE prints (and serializes) as
``"inf"``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Iterable

import numpy as np

from .errdist import (
    disturbance,
    heisenberg_bound,
    measurement_error,
    tradeoff_report,
    variance,
)
from .fisher import classical_fisher, pushforward_family, quadform_pinv, sld_fisher
from .optmeas import (
    ConstructionFailedError,
    NoRetrievalError,
    attainability_sweep,
    build_optimal_scheme,
    optimal_retrieval,
    random_vindication_sweep,
)
from .problem import ProblemSpec, SpecError, load_problem, problem_to_json
from .quantum_core import povm_from_kraus
from .simulate import ExperimentUndefinedError, disturbance_scaling_experiment, variance_scaling_experiment
from .su_basis import InvalidDimensionError, build_su_basis

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return f"{float(value):.12g}"
    return "" if value is None else str(value)


def jsonable(value: Any) -> Any:
    """Floats rounded to the printed 12 digits; non-finite values become strings."""
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return fmt(value)
        return float(fmt(value))
    return value


class Output:
    """Collects a summary mapping and optional table rows, then renders them."""

    def __init__(self, summary: dict, columns: list[str] | None = None, rows: Iterable[dict] = ()):
        self.summary = summary
        self.columns = columns or []
        self.rows = list(rows)

    def text(self) -> str:
        lines = []
        width = max((len(k) for k in self.summary), default=0)
        for k, v in self.summary.items():
            lines.append(f"{k:<{width}}  {fmt(v)}")
        if self.rows:
            lines.append("")
            lines.append(self.csv_text().rstrip("\n"))
        return "\n".join(lines) + "\n"

    def json_text(self) -> str:
        doc = dict(self.summary)
        if self.rows:
            doc["rows"] = self.rows
        return json.dumps(jsonable(doc), indent=2) + "\n"

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([fmt(row.get(c)) for c in self.columns])
        return buf.getvalue()


def _ext_diag(fisher, vec) -> dict:
    return {"fisher_rank": fisher.rank, "in_support": fisher.in_support(vec)}


def cmd_basis(d: int) -> Output:
    basis = build_su_basis(d)
    resid = float(np.abs(basis.gram() - np.eye(basis.size)).max())
    rows = []
    for mu, g in enumerate(basis.generators):
        for i in range(d):
            for j in range(d):
                rows.append({"index": mu, "row": i, "col": j, "re": g[i, j].real, "im": g[i, j].imag})
    summary = {
        "dim": d,
        "generators": basis.size,
        "orthonormality_residual": resid,
    }
    return Output(summary, ["index", "row", "col", "re", "im"], rows)


def cmd_error(spec: ProblemSpec) -> Output:
    spec.require("state", "x", "measurement")
    rho, x, m = spec.state, spec.x, spec.measurement
    j = classical_fisher(rho, povm_from_kraus(m))
    summary = {
        "error": measurement_error(rho, x, m),
        "quadratic_form": quadform_pinv(j, x.x),
        "variance": variance(rho, x),
        **_ext_diag(j, x.x),
    }
    return Output(summary)


def cmd_disturb(spec: ProblemSpec) -> Output:
    spec.require("state", "y", "measurement")
    rho, y, m = spec.state, spec.y, spec.measurement
    j = sld_fisher(pushforward_family(rho, m))
    summary = {
        "disturbance": disturbance(rho, y, m),
        "quadratic_form": quadform_pinv(j, y.x),
        "variance": variance(rho, y),
        **_ext_diag(j, y.x),
        "flagged_directions": int(np.sum(j.flagged)) if j.flagged is not None else 0,
    }
    return Output(summary)


def cmd_tradeoff(spec: ProblemSpec) -> Output:
    spec.require("state", "x", "y", "measurement")
    rep = tradeoff_report(spec.state, spec.x, spec.y, spec.measurement, seed=spec.params["seed"], slack=spec.params["tol"])
    return Output(rep.as_dict())


SWEEP_COLUMNS = ["w1", "error", "disturbance", "product", "bound", "gap", "failure"]


def cmd_optimal(spec: ProblemSpec) -> Output:
    spec.require("state", "x", "y")
    res = attainability_sweep(spec.state, spec.x, spec.y, spec.grid)
    rows = [dict(zip(SWEEP_COLUMNS, (r.w1, r.error, r.disturbance, r.product, r.bound, r.gap, r.failure))) for r in res.rows]
    if all(r.failure is not None for r in res.rows):
        raise CommandError("optimal scheme construction failed at every grid point", EXIT_NUMERICAL)
    best = min((r for r in res.rows if r.failure is None), key=lambda r: abs(r.gap))
    _, params = build_optimal_scheme(spec.state, spec.x, spec.y, best.w1)
    summary = {
        "attainable_bound": res.bound,
        "heisenberg_bound": res.heisenberg,
        "min_gap": res.min_gap,
        "min_relative_gap": res.min_relative_gap,
        "best_w1": best.w1,
        "constraint_residual": params.residual,
        "output_dim": 2 * spec.dim,
    }
    return Output(summary, SWEEP_COLUMNS, rows)


VINDICATION_COLUMNS = ["index", "error", "disturbance", "product", "heisenberg_bound", "attainable_bound"]


def cmd_sweep(spec: ProblemSpec, threads: int) -> Output:
    rep = random_vindication_sweep(spec.dim, spec.params["samples"], spec.params["seed"], threads=threads)
    rows = [{c: getattr(s, c) for c in VINDICATION_COLUMNS} for s in rep.samples]
    return Output(rep.summary(), VINDICATION_COLUMNS, rows)


SIMULATE_COLUMNS = ["side", "estimator", "n", "trials", "seed", "target", "mean", "mean_stderr", "n_var", "n_var_stderr", "bound", "converged"]


def cmd_simulate(spec: ProblemSpec, threads: int) -> Output:
    spec.require("state", "x", "measurement")
    p = spec.params
    rows = []
    run = variance_scaling_experiment(
        spec.state, spec.measurement, spec.x, p["n"], p["trials"], p["seed"], p["estimator"], threads
    )
    rows.append({"side": "error", **run.as_dict()})
    if spec.second is not None:
        spec.require("y")
        second = spec.second
        if second == "optimal":
            second = optimal_retrieval(pushforward_family(spec.state, spec.measurement), spec.y.x)
        run = disturbance_scaling_experiment(
            spec.state, spec.measurement, second, spec.y, p["n"], p["trials"], p["seed"], "mle", threads
        )
        rows.append({"side": "disturbance", **run.as_dict()})
    summary = {"experiments": len(rows), "heisenberg_bound": heisenberg_bound(spec.state, spec.x, spec.y) if spec.y else math.nan}
    return Output(summary, SIMULATE_COLUMNS, rows)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", metavar="FILE", help="JSON problem file")
    common.add_argument("--json", action="store_true", help="print machine-readable JSON")
    common.add_argument("--csv", metavar="FILE", help="also write table rows as CSV")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--tol", type=float, help="slack used when checking bounds")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for sweeps")
    common.add_argument("--dump-spec", action="store_true", help="print the normalized problem file and exit")

    parser = argparse.ArgumentParser(prog="qtradeoff", description="Error and disturbance of quantum measurements.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("basis", parents=[common], help="print the su(d) generator basis")
    p.add_argument("dim", type=int, nargs="?", help="Hilbert-space dimension")
    sub.add_parser("error", parents=[common], help="measurement error of X")
    sub.add_parser("disturb", parents=[common], help="disturbance of Y")
    sub.add_parser("tradeoff", parents=[common], help="error, disturbance and both bounds")
    sub.add_parser("optimal", parents=[common], help="sweep the bound-attaining scheme over w1")
    p = sub.add_parser("sweep", parents=[common], help="random check of the product bounds")
    p.add_argument("--dim", type=int, dest="sweep_dim", help="dimension when no problem file is given")
    p.add_argument("--samples", type=int, help="number of random instances")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimation experiments")
    p.add_argument("--n", type=int, help="shots per trial")
    p.add_argument("--trials", type=int, help="number of trials")
    p.add_argument("--estimator", choices=["linear", "mle"], help="estimator for the X side")
    return parser


def _load(args) -> ProblemSpec:
    if args.spec:
        spec = load_problem(args.spec)
    elif args.command == "sweep" and args.sweep_dim is not None:
        if args.sweep_dim < 2:
            raise SpecError("dim", "expected an integer >= 2")
        spec = ProblemSpec(args.sweep_dim)
    else:
        raise SpecError("", "--spec FILE is required for this command")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise SpecError("--seed", "seed must be an unsigned 64-bit integer")
    overrides = {"seed": args.seed, "tol": args.tol}
    for name in ("samples", "n", "trials", "estimator"):
        overrides[name] = getattr(args, name, None)
    return spec.with_params(**overrides)


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "basis":
            d = args.dim
            if d is None:
                d = load_problem(args.spec).dim if args.spec else None
            if d is None:
                raise SpecError("dim", "give a dimension or --spec")
            out = cmd_basis(d)
        else:
            spec = _load(args)
            if args.dump_spec:
                stdout.write(json.dumps(problem_to_json(spec), indent=2) + "\n")
                return EXIT_OK
            threads = max(1, args.threads)
            out = {
                "error": lambda: cmd_error(spec),
                "disturb": lambda: cmd_disturb(spec),
                "tradeoff": lambda: cmd_tradeoff(spec),
                "optimal": lambda: cmd_optimal(spec),
                "sweep": lambda: cmd_sweep(spec, threads),
                "simulate": lambda: cmd_simulate(spec, threads),
            }[args.command]()
    except CommandError as exc:
        stderr.write(f"qtradeoff: {exc}\n")
        return exc.code
    except (ConstructionFailedError, NoRetrievalError, ExperimentUndefinedError, np.linalg.LinAlgError) as exc:
        stderr.write(f"qtradeoff: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (SpecError, InvalidDimensionError, ValueError) as exc:
        stderr.write(f"qtradeoff: invalid input: {exc}\n")
        return EXIT_INVALID

    if args.csv:
        if not out.columns:
            out.columns = list(out.summary)
            out.rows = [out.summary]
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(out.csv_text())
    stdout.write(out.json_text() if args.json else out.text())
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
