import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnewton.circuit import QLSSConfig
from qnewton.errors import ZeroDiagonalError
from qnewton.newton import (
    CSV_COLUMNS,
    DIVERGED,
    MAX_ITERATIONS,
    THRESHOLD_REACHED,
    DirectSolver,
    GateQLSSSolver,
    GaussSeidelSolver,
    LinearSolver,
    ModelQLSSSolver,
    StopCriteria,
    gauss_seidel,
    make_solver,
    newton_solve,
)
from qnewton.problems import NonlinearProblem, burgers_space_time, nonlinear_poisson, random_spd_problem


def scalar_problem():
    return NonlinearProblem(
        residual=lambda u: u**2 - 4.0,
        jacobian=lambda u: np.array([[2.0 * u[0]]]),
        u0=np.array([3.0]),
    )


# Gauss-Seidel -----------------------------------------------------------------


def test_gauss_seidel_examples():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(gauss_seidel(np.eye(3), b), b)
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(gauss_seidel(A, [3.0, 3.0], iterations=60), [1.0, 1.0], atol=1e-12)
    with pytest.raises(ZeroDiagonalError):
        gauss_seidel(np.array([[0.0, 1.0], [1.0, 0.0]]), [1.0, 1.0])


def test_gauss_seidel_single_sweep_by_hand():
    A = np.array([[4.0, 1.0], [2.0, 5.0]])
    b = np.array([1.0, 2.0])
    x1 = 1.0 / 4.0
    x2 = (2.0 - 2.0 * x1) / 5.0
    np.testing.assert_allclose(gauss_seidel(A, b), [x1, x2])
    np.testing.assert_allclose(gauss_seidel(A, b, x0=[x1, x2]), [(1 - x2) / 4, (2 - 2 * (1 - x2) / 4) / 5])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 8))
def test_gauss_seidel_converges_on_dominant_matrices(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, size=(n, n))
    np.fill_diagonal(A, np.abs(A).sum(axis=1) + 1.0)
    b = rng.normal(size=n)
    x = np.linalg.solve(A, b)
    errs = [np.linalg.norm(gauss_seidel(A, b, iterations=k) - x) for k in (1, 5, 40)]
    assert errs[2] <= errs[1] <= errs[0]
    assert errs[2] < 1e-6 * max(1.0, np.linalg.norm(x))


# Newton loop ------------------------------------------------------------------


def test_affine_problem_converges_in_one_step():
    p = random_spd_problem(6, 0).as_nonlinear()
    _, rec = newton_solve(p, DirectSolver(), StopCriteria(threshold=1e-12))
    assert rec.iterations == 1
    assert rec.stop_reason == THRESHOLD_REACHED


def test_scalar_newton_by_hand():
    # u: 3 -> 13/6 -> 2.0064..., residuals |u^2 - 4|
    u1 = 3 - 5 / 6
    u2 = u1 - (u1**2 - 4) / (2 * u1)
    _, rec = newton_solve(scalar_problem(), DirectSolver(), StopCriteria(max_iterations=2))
    np.testing.assert_allclose(rec.residuals, [5.0, u1**2 - 4, u2**2 - 4], rtol=1e-14)
    assert u2 == pytest.approx(2.0064, abs=1e-4)
    assert rec.stop_reason == MAX_ITERATIONS


def test_direct_newton_is_superlinear():
    _, rec = newton_solve(nonlinear_poisson(8), DirectSolver(), StopCriteria(threshold=1e-10))
    assert rec.stop_reason == THRESHOLD_REACHED
    r = rec.residuals
    ratios = r[1:] / r[:-1]
    assert ratios[-1] < ratios[-2] < 0.1  # contraction factor collapses near the root


def test_recorded_residuals_match_independent_iteration():
    p = burgers_space_time(4)
    _, rec = newton_solve(p, DirectSolver(), StopCriteria(max_iterations=5))
    u = p.u0.copy()
    for entry in rec.entries:
        assert entry.residual == pytest.approx(np.linalg.norm(p.residual(u)), rel=1e-12)
        u = u - np.linalg.solve(p.jacobian(u), p.residual(u))


def test_model_solver_tracks_direct_at_high_precision():
    p = nonlinear_poisson(8)
    stop = StopCriteria(threshold=1e-8)
    u_direct, rec_direct = newton_solve(p, DirectSolver(), stop)
    u_model, rec_model = newton_solve(p, ModelQLSSSolver(40), stop)
    n = min(len(rec_direct.entries), len(rec_model.entries))
    # a model solve is off by about kappa * 2**-21 relative, compared on the scale of r_0
    kappa = np.linalg.cond(p.jacobian(p.u0))
    r0 = rec_direct.residuals[0]
    tol = kappa * 2.0**-21 * r0
    np.testing.assert_allclose(rec_model.residuals[:n - 1], rec_direct.residuals[:n - 1], rtol=0, atol=tol)
    np.testing.assert_allclose(u_model, u_direct, atol=1e-6)


def test_gate_solver_reduces_residual():
    p = nonlinear_poisson(2)
    solver = GateQLSSSolver(QLSSConfig(3))
    _, rec = newton_solve(p, solver, StopCriteria(max_iterations=3))
    assert rec.residuals[-1] < rec.residuals[0]
    assert solver.calls == 3
    assert rec.entries[0].solver_diag["mode"] == "hermitian-pd"


def test_max_iterations_stop():
    _, rec = newton_solve(nonlinear_poisson(4), DirectSolver(), StopCriteria(max_iterations=1))
    assert rec.stop_reason == MAX_ITERATIONS
    assert len(rec.entries) == 2


def test_failed_inner_solve_is_recorded():
    p = NonlinearProblem(lambda u: u + 1.0, lambda u: np.zeros((2, 2)), np.zeros(2))
    _, rec = newton_solve(p, DirectSolver())
    assert rec.stop_reason == DIVERGED
    assert rec.failure.startswith("iteration 0")
    _, rec = newton_solve(p, GaussSeidelSolver())
    assert rec.stop_reason == DIVERGED
    assert "zero-free diagonal" in rec.failure


class Exploding(LinearSolver):
    name = "exploding"

    def solve(self, J, r):
        return 1e13 * r, {}


def test_divergence_guard():
    _, rec = newton_solve(random_spd_problem(3, 0).as_nonlinear(), Exploding())
    assert rec.stop_reason == DIVERGED
    assert rec.failure is None
    assert rec.residuals[-1] > 1e12


def test_iterations_to():
    _, rec = newton_solve(scalar_problem(), DirectSolver(), StopCriteria(threshold=1e-12))
    assert rec.iterations_to(1.0) == 1
    assert rec.iterations_to(1e-12) == rec.iterations
    assert rec.iterations_to(0.0) is None


def test_csv_format():
    _, rec = newton_solve(nonlinear_poisson(3), ModelQLSSSolver(12), StopCriteria(max_iterations=2))
    rows = list(csv.reader(io.StringIO(rec.to_csv())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
    assert float(rows[1][1]) == rec.residuals[0]  # 17 digits round-trip exactly
    assert "p_success=" in rows[1][2] and rows[1][3] == ""
    _, timed = newton_solve(nonlinear_poisson(3), DirectSolver(), StopCriteria(max_iterations=1), timing=True)
    assert timed.entries[0].ms is not None


def test_make_solver_and_validation():
    assert isinstance(make_solver("direct"), DirectSolver)
    assert make_solver("gauss-seidel", gs_iterations=7).iterations == 7
    assert make_solver("model", m=9).describe()["m"] == 9
    assert make_solver("gate", m=3, readout="sampled", seed=5).config.seed == 5
    with pytest.raises(ValueError):
        make_solver("cg")
    with pytest.raises(ValueError):
        ModelQLSSSolver(8, mode="qr")
    with pytest.raises(ValueError):
        StopCriteria(threshold=0)
    with pytest.raises(ValueError):
        StopCriteria(max_iterations=0)
