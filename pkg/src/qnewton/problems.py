"""Finite-difference test problems and the random-matrix generator.

Grid conventions
----------------
* Unit-square problems use interior points only: ``x_i = i h`` for
  ``i = 1..N`` with ``h = 1 / (N + 1)``; Dirichlet data is folded into the
  right-hand side.
* Unknowns are ordered x-major: index ``i * N + j`` holds the point
  ``(x_i, y_j)``. The space-time Burgers grid is ordered time-major, index
  ``j * N + i`` holding ``u(x_i, t_j)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .qsim import make_rng


@dataclass
class LinearProblem:
    """``A x = b`` with a direct-solve reference."""

    A: np.ndarray
    b: np.ndarray
    reference: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.b.size

    def relative_error(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x) - self.reference) / np.linalg.norm(self.reference))

    def as_nonlinear(self) -> "NonlinearProblem":
        """``F(u) = A u - b``: Newton with an exact inner solve finishes in one step."""
        A, b = self.A, self.b
        return NonlinearProblem(
            residual=lambda u: A @ u - b,
            jacobian=lambda u: A,
            u0=np.zeros(b.size, dtype=np.result_type(A, b)),
            metadata={**self.metadata, "wrapped": "linear"},
        )

    def to_json(self) -> str:
        return json.dumps(self.metadata, sort_keys=True)


@dataclass
class NonlinearProblem:
    """``F(u) = y`` with an analytic Jacobian."""

    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    u0: np.ndarray
    y: np.ndarray | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.u0.size

    def target(self) -> np.ndarray:
        return np.zeros_like(self.u0) if self.y is None else self.y

    def residual_norm(self, u) -> float:
        return float(np.linalg.norm(self.residual(u) - self.target()))

    def to_json(self) -> str:
        return json.dumps(self.metadata, sort_keys=True)


def _reference(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct solve; for numerically singular `A` the minimum-norm least-squares solution."""
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] > 1e-12 * sv[0]:
        return np.linalg.solve(A, b)
    return np.linalg.lstsq(A, b, rcond=1e-12)[0]


def advection_diffusion_system(N: int, D: float = 0.25) -> LinearProblem:
    """``v . grad u - D lap u = D sin x sin y`` on the periodic square ``[0, 2 pi)^2``.

    ``v = (sin x cos y, -cos x sin y)``, both terms with second-order central
    differences on ``N x N`` points, ``h = 2 pi / N``. The operator
    annihilates constants; the right-hand side is mean free, so the
    reference is the mean-free least-squares solution.
    """
    if N < 3:
        raise ValueError("N must be >= 3")
    h = 2 * np.pi / N
    x = np.arange(N) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    vx = (np.sin(X) * np.cos(Y)).ravel()
    vy = (-np.cos(X) * np.sin(Y)).ravel()
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    row = (i * N + j).ravel()

    def at(di, dj):
        return (((i + di) % N) * N + (j + dj) % N).ravel()

    n = N * N
    A = np.zeros((n, n))
    A[row, row] += 4 * D / h**2
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        np.add.at(A, (row, at(di, dj)), -D / h**2)
    np.add.at(A, (row, at(1, 0)), vx / (2 * h))
    np.add.at(A, (row, at(-1, 0)), -vx / (2 * h))
    np.add.at(A, (row, at(0, 1)), vy / (2 * h))
    np.add.at(A, (row, at(0, -1)), -vy / (2 * h))
    b = (D * np.sin(X) * np.sin(Y)).ravel()
    meta = {"problem": "advdiff", "N": N, "D": D, "h": h, "domain": "[0,2pi)^2 periodic", "ordering": "x-major"}
    return LinearProblem(A, b, _reference(A, b), meta)


def laplacian_2d(N: int, h: float) -> np.ndarray:
    """``-lap_h`` (5-point) on the ``N x N`` interior grid with zero Dirichlet data."""
    T = 2 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)
    I = np.eye(N)
    return (np.kron(T, I) + np.kron(I, T)) / h**2


def nonlinear_poisson(N: int, C: float = 10.0) -> NonlinearProblem:
    """``-lap u = C^2 cos(Cx) cos(Cy) + u^2`` on ``[0, 1]^2`` with ``u = cos(Cx) cos(Cy)`` on the boundary.

    ``F(u) = -lap_h u - u^2 - C^2 cos(Cx) cos(Cy)``, where the boundary values
    enter ``-lap_h``; ``J(u) = -lap_h - 2 diag(u)``; ``u0 = 0``.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    h = 1.0 / (N + 1)
    xs = np.arange(1, N + 1) * h
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    source = (C**2 * np.cos(C * X) * np.cos(C * Y)).ravel()

    def g(x, y):
        return np.cos(C * x) * np.cos(C * y)

    bc = np.zeros((N, N))
    bc[0, :] += g(0.0, xs)
    bc[-1, :] += g(1.0, xs)
    bc[:, 0] += g(xs, 0.0)
    bc[:, -1] += g(xs, 1.0)
    bc = bc.ravel() / h**2
    L = laplacian_2d(N, h)

    def residual(u):
        return L @ u - bc - u * u - source

    def jacobian(u):
        return L - 2 * np.diag(u)

    meta = {"problem": "poisson", "N": N, "C": C, "h": h, "domain": "[0,1]^2 interior", "ordering": "x-major"}
    return NonlinearProblem(residual, jacobian, np.zeros(N * N), metadata=meta)


def burgers_space_time(N: int, t_end: float = 0.5) -> NonlinearProblem:
    """Inviscid Burgers ``u_t + u u_x = 0`` as one nonlinear system over all time levels.

    ``u(x, 0) = sin(2 pi x)`` and ``u(0, t) = u(1, t) = 0``. Interior points
    ``x_i = i / (N + 1)``, time levels ``t_j = j dt`` with ``dt = t_end / N``
    (``j = 1..N``), backward Euler in time and first-order upwinding in
    space: backward differences where ``u >= 0``, forward where ``u < 0``.
    ``u0`` repeats the initial condition on every level.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    h = 1.0 / (N + 1)
    dt = t_end / N
    xs = np.arange(1, N + 1) * h
    init = np.sin(2 * np.pi * xs)

    def residual(u):
        U = u.reshape(N, N)
        prev = np.vstack([init, U[:-1]])
        pad = np.pad(U, ((0, 0), (1, 1)))
        back = (pad[:, 1:-1] - pad[:, :-2]) / h
        fwd = (pad[:, 2:] - pad[:, 1:-1]) / h
        return ((U - prev) / dt + U * np.where(U >= 0, back, fwd)).ravel()

    def jacobian(u):
        U = u.reshape(N, N)
        pad = np.pad(U, ((0, 0), (1, 1)))
        left, right = pad[:, :-2], pad[:, 2:]
        pos = U >= 0
        n = N * N
        J = np.zeros((n, n))
        r = np.arange(n)
        diag = 1 / dt + np.where(pos, (2 * U - left) / h, (right - 2 * U) / h)
        J[r, r] = diag.ravel()
        J[r[N:], r[N:] - N] = -1 / dt
        i = np.tile(np.arange(N), N)
        flat_u, flat_pos = U.ravel(), pos.ravel()
        lo = flat_pos & (i > 0)
        J[r[lo], r[lo] - 1] = -flat_u[lo] / h
        hi = ~flat_pos & (i < N - 1)
        J[r[hi], r[hi] + 1] = flat_u[hi] / h
        return J

    meta = {"problem": "burgers", "N": N, "t_end": t_end, "h": h, "dt": dt, "ordering": "time-major"}
    return NonlinearProblem(residual, jacobian, np.tile(init, N), metadata=meta)


def random_spd_problem(N: int, seed: int) -> LinearProblem:
    """Normal equations ``(A^T A, A^T b)`` of a random strictly diagonally dominant `A`.

    Off-diagonal entries are uniform in ``[-1, 1]``, each diagonal entry is
    its row's absolute off-diagonal sum plus a uniform ``[0, 1]`` margin, and
    `b` is a random unit vector. Draws come from a Philox stream.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    rng = make_rng(seed)
    A = rng.uniform(-1.0, 1.0, size=(N, N))
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, np.abs(A).sum(axis=1) + rng.uniform(0.0, 1.0, size=N))
    b = rng.normal(size=N)
    b /= np.linalg.norm(b)
    G, rhs = A.T @ A, A.T @ b
    meta = {"problem": "random", "N": N, "seed": int(seed)}
    return LinearProblem(G, rhs, np.linalg.solve(G, rhs), meta)


def build_problem(description: dict[str, Any]):
    """Rebuild a problem from its ``metadata`` / ``to_json`` description."""
    kind = description["problem"]
    N = int(description["N"])
    if kind == "advdiff":
        return advection_diffusion_system(N, description.get("D", 0.25))
    if kind == "random":
        return random_spd_problem(N, int(description.get("seed", 0)))
    if kind == "poisson":
        return nonlinear_poisson(N, description.get("C", 10.0))
    if kind == "burgers":
        return burgers_space_time(N, description.get("t_end", 0.5))
    raise ValueError(f"unknown problem {kind!r}")


def finite_difference_jacobian(F, u: np.ndarray) -> np.ndarray:
    """Central differences with step ``1e-6 * (1 + |u_i|)`` per column."""
    u = np.asarray(u, dtype=float)
    cols = []
    for i in range(u.size):
        step = 1e-6 * (1 + abs(u[i]))
        e = np.zeros_like(u)
        e[i] = step
        cols.append((F(u + e) - F(u - e)) / (2 * step))
    return np.column_stack(cols)
