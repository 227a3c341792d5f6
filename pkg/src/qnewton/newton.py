"""Newton's method with pluggable inner linear solvers, and the Gauss-Seidel baseline."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import solve_triangular

from .circuit import QLSSConfig, run_qlss
from .encoding import MODES
from .errors import LinearSolveFailedError, WorkbenchError, ZeroDiagonalError
from .fixedpoint import DEFAULT_PRESCALE_TARGET
from .model import model_qlss_solve
from .problems import NonlinearProblem
from .tensor import is_hermitian

THRESHOLD_REACHED = "threshold reached"
MAX_ITERATIONS = "max iterations"
DIVERGED = "diverged"
CSV_COLUMNS = ("iteration", "residual", "solver_diag", "ms")


def fmt_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def gauss_seidel(A, b, x0=None, iterations: int = 1) -> np.ndarray:
    """Forward Gauss-Seidel sweeps ``x <- (D + L)^-1 (b - U x)``.

    Exactly `iterations` sweeps are done; no convergence test is made, so a
    matrix the method diverges on simply yields a growing iterate.

    Raises
    ------
    ZeroDiagonalError
        If a diagonal entry of `A` is zero.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if np.any(np.diag(A) == 0):
        raise ZeroDiagonalError("Gauss-Seidel needs a zero-free diagonal")
    lower = np.tril(A)
    upper = np.triu(A, 1)
    x = np.zeros(b.shape, dtype=np.result_type(A, b)) if x0 is None else np.array(x0, dtype=np.result_type(A, b))
    for _ in range(iterations):
        x = solve_triangular(lower, b - upper @ x, lower=True)
    return x


class LinearSolver:
    """Solves ``J dx = r``; returns ``(dx, diagnostics)``."""

    name = "base"

    def solve(self, J: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, dict[str, Any]]:
        raise NotImplementedError

    def describe(self) -> dict[str, Any]:
        return {"solver": self.name}


class DirectSolver(LinearSolver):
    name = "direct"

    def solve(self, J, r):
        try:
            return np.linalg.solve(J, r), {}
        except np.linalg.LinAlgError as exc:
            raise LinearSolveFailedError(f"direct solve failed: {exc}") from None


@dataclass
class GaussSeidelSolver(LinearSolver):
    """A fixed number of sweeps started from zero on every call."""

    iterations: int = 25
    name = "gauss-seidel"

    def solve(self, J, r):
        try:
            return gauss_seidel(J, r, None, self.iterations), {}
        except ZeroDiagonalError as exc:
            raise LinearSolveFailedError(str(exc)) from exc

    def describe(self):
        return {"solver": self.name, "iterations": self.iterations}


def _pick_mode(J: np.ndarray, mode: str) -> str:
    """``auto``: Hermitian positive definite Jacobians are used as they are, anything else is dilated."""
    if mode != "auto":
        return mode
    if is_hermitian(J):
        try:
            np.linalg.cholesky(J)
            return "hermitian-pd"
        except np.linalg.LinAlgError:
            pass
    return "dilation"


def _qlss_diag(res) -> dict[str, Any]:
    return {
        "p_success": res.success_probability,
        "prescale": res.diagnostics["prescale"],
        "mode": res.diagnostics["mode"],
    }


@dataclass
class ModelQLSSSolver(LinearSolver):
    m: int
    mode: str = "auto"
    prescale_target: float | None = DEFAULT_PRESCALE_TARGET
    name = "model"

    def __post_init__(self):
        if self.mode != "auto" and self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    def solve(self, J, r):
        try:
            res = model_qlss_solve(J, r, self.m, _pick_mode(J, self.mode), prescale_target=self.prescale_target)
        except WorkbenchError as exc:
            raise LinearSolveFailedError(f"model QLSS failed: {exc}") from exc
        return res.solution, _qlss_diag(res)

    def describe(self):
        return {"solver": self.name, "m": self.m, "mode": self.mode, "prescale_target": self.prescale_target}


@dataclass
class GateQLSSSolver(LinearSolver):
    """Gate-level QLSS; in sampled mode call ``i`` uses seed ``config.seed + i``."""

    config: QLSSConfig
    calls: int = 0
    name = "gate"

    def solve(self, J, r):
        cfg = self.config
        mode = _pick_mode(J, cfg.mode)
        seed = cfg.seed + self.calls
        self.calls += 1
        try:
            res = run_qlss(J, r, QLSSConfig(**{**cfg.__dict__, "mode": mode, "seed": seed}))
        except WorkbenchError as exc:
            raise LinearSolveFailedError(f"gate QLSS failed: {exc}") from exc
        return res.solution, _qlss_diag(res)

    def describe(self):
        return {"solver": self.name, **self.config.__dict__}


@dataclass(frozen=True)
class StopCriteria:
    threshold: float = 1e-9
    max_iterations: int = 100
    divergence: float = 1e12

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class IterationEntry:
    iteration: int
    residual: float
    solver_diag: dict[str, Any] = field(default_factory=dict)
    ms: float | None = None


@dataclass
class ConvergenceRecord:
    """Residual ``||F(u_i) - y||_2`` of every iterate, the solve that followed it, and why the loop stopped."""

    entries: list[IterationEntry] = field(default_factory=list)
    stop_reason: str = ""
    failure: str | None = None

    @property
    def residuals(self) -> np.ndarray:
        return np.array([e.residual for e in self.entries])

    @property
    def iterations(self) -> int:
        """Newton steps taken."""
        return max(0, len(self.entries) - 1)

    def iterations_to(self, threshold: float) -> int | None:
        """Index of the first iterate with residual below `threshold`, if any."""
        for e in self.entries:
            if e.residual < threshold:
                return e.iteration
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for e in self.entries:
            diag = ";".join(
                f"{k}={fmt_float(v) if isinstance(v, float) else v}" for k, v in sorted(e.solver_diag.items())
            )
            w.writerow([e.iteration, fmt_float(e.residual), diag, "" if e.ms is None else f"{e.ms:.3f}"])
        return buf.getvalue()


def newton_solve(
    problem: NonlinearProblem,
    solver: LinearSolver,
    stop: StopCriteria = StopCriteria(),
    *,
    timing: bool = False,
) -> tuple[np.ndarray, ConvergenceRecord]:
    """Undamped Newton iteration ``u <- u + J(u)^-1 (y - F(u))``.

    Parameters
    ----------
    problem
        Residual, Jacobian, target and starting point.
    solver
        Inner linear solver.
    stop
        Threshold, iteration cap and divergence guard.
    timing
        Record the wall-clock milliseconds of each inner solve. Off by
        default so that records are reproducible byte for byte.

    Returns
    -------
    u, record
        The last iterate and its history. A failed inner solve ends the
        loop with stop reason ``"diverged"`` and the message in
        ``record.failure``; nothing is raised.
    """
    u = np.array(problem.u0, copy=True)
    y = problem.target()
    record = ConvergenceRecord()
    for it in range(stop.max_iterations + 1):
        r = y - problem.residual(u)
        res = float(np.linalg.norm(r))
        entry = IterationEntry(it, res)
        record.entries.append(entry)
        if not math.isfinite(res) or res > stop.divergence:
            record.stop_reason = DIVERGED
            break
        if res < stop.threshold:
            record.stop_reason = THRESHOLD_REACHED
            break
        if it == stop.max_iterations:
            record.stop_reason = MAX_ITERATIONS
            break
        t0 = time.perf_counter()
        try:
            du, diag = solver.solve(problem.jacobian(u), r)
        except LinearSolveFailedError as exc:
            exc.iteration = it
            record.stop_reason = DIVERGED
            record.failure = f"iteration {it}: {exc}"
            break
        if timing:
            entry.ms = (time.perf_counter() - t0) * 1e3
        entry.solver_diag = diag
        u = u + du
    return u, record


def make_solver(name: str, **options) -> LinearSolver:
    """Solver factory used by the command line: ``direct``, ``gauss-seidel``, ``model`` or ``gate``."""
    if name == "direct":
        return DirectSolver()
    if name == "gauss-seidel":
        return GaussSeidelSolver(int(options.get("gs_iterations", 25)))
    if name == "model":
        return ModelQLSSSolver(int(options["m"]), options.get("mode", "auto"),
                               options.get("prescale_target", DEFAULT_PRESCALE_TARGET))
    if name == "gate":
        return GateQLSSSolver(
            QLSSConfig(
                int(options["m"]),
                options.get("mode", "auto"),
                options.get("readout", "exact"),
                int(options.get("shots", 1024)),
                int(options.get("seed", 0)),
                prescale_target=options.get("prescale_target", DEFAULT_PRESCALE_TARGET),
            )
        )
    raise ValueError(f"unknown solver {name!r}")
