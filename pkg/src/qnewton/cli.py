"""Command-line front end.

Every command that writes a CSV also writes ``<stem>.manifest.json`` next to
it; ``qnewton replay <manifest>`` re-runs the recorded configuration. Output
goes to ``--out``, else ``$QNEWTON_OUTPUT_DIR``, else the working directory.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .circuit import QLSSConfig, run_qlss
from .errors import RangeViolationError, WidthExceededError, WorkbenchError
from .model import model_qlss_solve
from .newton import DIVERGED, StopCriteria, fmt_float, gauss_seidel, make_solver, newton_solve
from .problems import advection_diffusion_system, burgers_space_time, nonlinear_poisson, random_spd_problem
from .resources import TABLE_EPSILONS, TABLE_UNKNOWNS, estimate, table, to_csv, to_markdown

MODE_CHOICES = ["auto", "hermitian-pd", "normal-equations", "dilation"]
# linear experiments run on the normal equations unless told otherwise
DEFAULT_LINEAR_MODE = {"advdiff": "normal-equations", "random": "hermitian-pd"}

OUTPUT_ENV = "QNEWTON_OUTPUT_DIR"
CSV_SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunManifest:
    """Configuration echo sufficient to repeat a run."""

    command: str
    config: dict[str, Any]
    version: str = __version__
    csv_schema: int = CSV_SCHEMA_VERSION
    timestamp: str = field(default_factory=lambda: _timestamp())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return t.isoformat(timespec="seconds")


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(args, stem: str, text: str, config: dict[str, Any]) -> Path:
    d = _out_dir(args)
    path = d / f"{stem}.csv"
    path.write_text(text)
    (d / f"{stem}.manifest.json").write_text(RunManifest(args.command, config).to_json())
    return path


def _config(args) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "verbose")}


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


# linear solves ---------------------------------------------------------------


def _linear_problem(kind: str, n: int, seed: int):
    if kind == "advdiff":
        return advection_diffusion_system(n)
    if kind == "random":
        return random_spd_problem(n, seed)
    raise ConfigError(f"unknown linear problem {kind!r}")


def _solve_linear(problem, solver: str, m, mode: str, shots, seed: int, gs_iterations: int):
    """Returns ``(x, summary)``."""
    A, b = problem.A, problem.b
    mode = mode or DEFAULT_LINEAR_MODE[problem.metadata["problem"]]
    summary: dict[str, Any] = {}
    if solver == "direct":
        x = np.linalg.lstsq(A, b, rcond=None)[0]
    elif solver == "gauss-seidel":
        x = gauss_seidel(A, b, None, gs_iterations)
    elif solver in ("model", "gate"):
        if m is None:
            raise ConfigError(f"--m is required for the {solver} solver")
        if solver == "model":
            res = model_qlss_solve(A, b, m, mode)
        else:
            readout = "sampled" if shots else "exact"
            res = run_qlss(A, b, QLSSConfig(m, mode, readout, shots or 1, seed))
            summary["qubits"] = res.diagnostics["qubits"]
            summary["accepted_shots"] = res.diagnostics["accepted_shots"]
        x = res.solution
        summary["success_probability"] = res.success_probability
        summary["formula_probability"] = res.diagnostics["formula_probability"]
        summary["prescale"] = res.diagnostics["prescale"]
        summary["mode"] = res.diagnostics["mode"]
    else:
        raise ConfigError(f"unknown solver {solver!r}")
    summary = {"relative_error": problem.relative_error(x), **summary}
    return x, summary


def cmd_solve_linear(args) -> int:
    problem = _linear_problem(args.problem, args.n, args.seed)
    x, summary = _solve_linear(problem, args.solver, args.m, args.mode, args.shots, args.seed, args.gs_iterations)
    rows = [("index", "solution", "reference")]
    rows += [(i, _cell(float(np.real(v))), _cell(float(r))) for i, (v, r) in enumerate(zip(x, problem.reference))]
    stem = f"linear_{args.problem}_n{args.n}_{args.solver}" + (f"_m{args.m}" if args.m is not None else "")
    _write(args, stem, _csv(rows), _config(args))
    _write(args, stem + "_summary", _csv([("key", "value")] + [(k, _cell(v)) for k, v in summary.items()]), _config(args))
    print(",".join(f"{k}={_cell(v)}" for k, v in summary.items()))
    return EXIT_OK


# Newton ----------------------------------------------------------------------


def _nonlinear_problem(kind: str, n: int):
    if kind == "poisson":
        return nonlinear_poisson(n)
    if kind == "burgers":
        return burgers_space_time(n)
    raise ConfigError(f"unknown nonlinear problem {kind!r}")


def _newton_solver(args, m, seed):
    if args.solver in ("model", "gate") and m is None:
        raise ConfigError(f"--m is required for the {args.solver} solver")
    return make_solver(
        args.solver,
        m=m,
        mode=args.mode or "auto",
        gs_iterations=args.gs_iterations,
        readout="sampled" if args.shots else "exact",
        shots=args.shots or 1,
        seed=seed,
    )


def cmd_solve_newton(args) -> int:
    problem = _nonlinear_problem(args.problem, args.n)
    solver = _newton_solver(args, args.m, args.seed)
    stop = StopCriteria(args.tol, args.max_iters)
    _, record = newton_solve(problem, solver, stop, timing=args.timing)
    stem = f"newton_{args.problem}_n{args.n}_{args.solver}" + (f"_m{args.m}" if args.m is not None else "")
    _write(args, stem, record.to_csv(), _config(args))
    print(f"stop_reason={record.stop_reason},iterations={record.iterations},residual={fmt_float(record.residuals[-1])}")
    if record.stop_reason == DIVERGED and record.failure:
        print(f"error: {record.failure}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# sweeps ----------------------------------------------------------------------


def cell_seed(seed: int, cell: int, repeat: int) -> int:
    """Per-cell seed derived from the run seed; independent of execution order."""
    return int(np.random.SeedSequence([seed, cell, repeat]).generate_state(1)[0])


def _sweep_cell(task) -> dict[str, Any]:
    args_dict, value, cell, repeat = task
    args = argparse.Namespace(**args_dict)
    n = value if args.vary == "n" else args.n
    m = value if args.vary == "m" else args.m
    seed = cell_seed(args.seed, cell, repeat)
    if args.problem in ("advdiff", "random"):
        problem = _linear_problem(args.problem, n, seed if args.problem == "random" else args.seed)
        try:
            _, summary = _solve_linear(problem, args.solver, m, args.mode, args.shots, seed, args.gs_iterations)
            return {"error": summary["relative_error"]}
        except WorkbenchError as exc:
            return {"error": None, "failure": str(exc)}
    problem = _nonlinear_problem(args.problem, n)
    _, rec = newton_solve(problem, _newton_solver(args, m, seed), StopCriteria(args.tol, args.max_iters))
    return {"iterations": rec.iterations_to(args.tol), "final": float(rec.residuals[-1]), "stop": rec.stop_reason}


def _band(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None, None
    return min(vals), float(np.median(vals)), max(vals)


def cmd_sweep(args) -> int:
    values = [int(v) for v in args.values.split(",") if v.strip()] if args.values else []
    if not values:
        raise ConfigError("--values must list at least one value")
    if args.repeat < 1:
        raise ConfigError("--repeat must be >= 1")
    if args.vary == "n" and args.m is None and args.solver in ("model", "gate"):
        raise ConfigError("--m is required when varying n with a QLSS solver")
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    tasks = [(cfg, v, c, r) for c, v in enumerate(values) for r in range(args.repeat)]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]

    linear = args.problem in ("advdiff", "random")
    if linear:
        rows = [(args.vary, "runs", "failed", "error_mean", "error_min", "error_median", "error_max")]
    else:
        rows = [(args.vary, "runs", "converged", "iterations_min", "iterations_median", "iterations_max",
                 "final_residual_min", "final_residual_median", "final_residual_max")]
    for c, v in enumerate(values):
        cell = results[c * args.repeat : (c + 1) * args.repeat]
        if linear:
            errs = [r["error"] for r in cell]
            ok = [e for e in errs if e is not None]
            mean = float(np.mean(ok)) if ok else None
            rows.append((v, len(cell), len(cell) - len(ok), _cell(mean), *map(_cell, _band(errs))))
        else:
            its = [r["iterations"] for r in cell]
            conv = sum(i is not None for i in its)
            rows.append((v, len(cell), conv, *map(_cell, _band(its)), *map(_cell, _band([r["final"] for r in cell]))))
    stem = f"sweep_{args.problem}_{args.vary}_{args.solver}"
    path = _write(args, stem, _csv(rows), _config(args))
    print(path.read_text(), end="")
    return EXIT_OK


# resources -------------------------------------------------------------------


def cmd_estimate_resources(args) -> int:
    if args.table:
        rows = table(include_dilation_qubit=args.equation_form)
    else:
        if args.n_unknowns is None or args.epsilon is None:
            raise ConfigError("give --n-unknowns and --epsilon, or --table")
        try:
            rows = [estimate(args.n_unknowns, args.epsilon, args.equation_form)]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    out = to_csv(rows, args.equation_form) if args.format == "csv" else to_markdown(rows, args.equation_form)
    print(out, end="")
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        manifest = RunManifest.from_json(Path(args.manifest).read_text())
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from None
    handler = COMMANDS.get(manifest.command)
    if handler is None or manifest.command == "replay":
        raise ConfigError(f"manifest names an unknown command {manifest.command!r}")
    replayed = argparse.Namespace(**manifest.config, out=args.out, verbose=args.verbose, func=handler)
    replayed.command = manifest.command
    return handler(replayed)


COMMANDS = {
    "solve-linear": cmd_solve_linear,
    "solve-newton": cmd_solve_newton,
    "sweep": cmd_sweep,
    "estimate-resources": cmd_estimate_resources,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qnewton", description="Comparator QLSS and quantum Newton experiments.")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_opts(sp, choices):
        sp.add_argument("--n", type=int, required=True, help="grid points per dimension (or matrix size)")
        sp.add_argument("--m", type=int, help="clock bits")
        sp.add_argument("--solver", choices=choices, required=True)
        sp.add_argument("--mode", choices=MODE_CHOICES,
                        help="encoding; default normal-equations for advdiff, hermitian-pd for random, auto for Newton")
        sp.add_argument("--shots", type=int, default=0, help="sampled read-out with this many shots (gate solver)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--gs-iterations", type=int, default=25)

    solvers = ["gate", "model", "direct", "gauss-seidel"]
    sp = sub.add_parser("solve-linear", help="one linear solve against the direct reference")
    sp.add_argument("--problem", choices=["advdiff", "random"], required=True)
    solver_opts(sp, solvers)
    sp.set_defaults(func=cmd_solve_linear)

    sp = sub.add_parser("solve-newton", help="Newton iteration with a chosen inner solver")
    sp.add_argument("--problem", choices=["poisson", "burgers"], required=True)
    solver_opts(sp, solvers)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--max-iters", type=int, default=100)
    sp.add_argument("--timing", action="store_true", help="fill the ms column (breaks byte-identical output)")
    sp.set_defaults(func=cmd_solve_newton)

    sp = sub.add_parser("sweep", help="aggregate over a list of m or n values")
    sp.add_argument("--vary", choices=["m", "n"], required=True)
    sp.add_argument("--values", default="", help="comma-separated integers")
    sp.add_argument("--problem", choices=["poisson", "burgers", "advdiff", "random"], required=True)
    sp.add_argument("--repeat", type=int, default=1)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--max-iters", type=int, default=100)
    sp.add_argument("--n", type=int, help="fixed n when varying m")
    sp.add_argument("--m", type=int, help="fixed m when varying n")
    sp.add_argument("--solver", choices=solvers, default="model")
    sp.add_argument("--mode", choices=MODE_CHOICES)
    sp.add_argument("--shots", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--gs-iterations", type=int, default=25)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("estimate-resources", help="qubit counts")
    sp.add_argument("--n-unknowns", help="number of unknowns, e.g. 1e24")
    sp.add_argument("--epsilon", help="target accuracy, e.g. 1e-12")
    sp.add_argument("--equation-form", action="store_true", help="include the dilation qubit")
    sp.add_argument("--table", action="store_true",
                    help=f"all combinations of N in {TABLE_UNKNOWNS} and eps in {TABLE_EPSILONS}")
    sp.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    sp.set_defaults(func=cmd_estimate_resources)

    sp = sub.add_parser("replay", help="re-run the configuration stored in a manifest")
    sp.add_argument("manifest")
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # usage errors exit with 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "sweep" and args.vary == "m" and args.n is None:
        parser.error("--n is required when varying m")
    try:
        return args.func(args)
    except (ConfigError, WidthExceededError, RangeViolationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WorkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
