"""Problem encodings and result plumbing shared by the gate-level and model solvers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DegenerateDirectionError, DimensionMismatchError, NonHermitianError, NotPositiveDefiniteError
from .fixedpoint import DEFAULT_PRESCALE_TARGET, FixedPointFormat
from .tensor import as_matrix, dilate, gershgorin_bound, is_hermitian

MODES = ("hermitian-pd", "normal-equations", "dilation")


@dataclass(frozen=True)
class EncodedProblem:
    """A Hermitian system ``matrix @ y = rhs`` whose solution decodes to ``A^-1 b``."""

    matrix: np.ndarray
    rhs: np.ndarray
    mode: str
    size: int  # unknowns of the original system

    @property
    def signed(self) -> bool:
        """Whether the spectrum has both signs (needs a two's-complement clock)."""
        return self.mode == "dilation"

    def decode(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if self.mode == "dilation":
            return y[self.size : 2 * self.size]
        return y[: self.size]


def resolve_mode(A: np.ndarray, mode: str) -> str:
    """Map ``"auto"`` to ``hermitian-pd`` for Hermitian input and ``dilation`` otherwise."""
    if mode == "auto":
        return "hermitian-pd" if is_hermitian(A) else "dilation"
    if mode not in MODES:
        raise ValueError(f"unknown encoding mode {mode!r}; expected one of {MODES} or 'auto'")
    return mode


def encode_problem(A, b, mode: str = "auto", check_positive: bool = True) -> EncodedProblem:
    """Turn ``A x = b`` into a Hermitian system the QLSS can invert.

    ``hermitian-pd`` keeps the system (positivity is checked with a Cholesky
    factorization), ``normal-equations`` uses ``(A^H A, A^H b)`` and
    ``dilation`` uses ``([[0, A], [A^H, 0]], (b, 0))`` whose solution is
    ``(0, A^-1 b)``.
    """
    A = as_matrix(A)
    b = np.asarray(b).ravel()
    if b.size != A.shape[0]:
        raise DimensionMismatchError(f"rhs has {b.size} entries for a {A.shape[0]}x{A.shape[0]} matrix")
    mode = resolve_mode(A, mode)
    n = A.shape[0]
    if mode == "hermitian-pd":
        if not is_hermitian(A):
            raise NonHermitianError("hermitian-pd mode needs a Hermitian matrix")
        if check_positive:
            try:
                np.linalg.cholesky(A)
            except np.linalg.LinAlgError:
                raise NotPositiveDefiniteError("matrix has a non-positive eigenvalue") from None
        return EncodedProblem(A, b, mode, n)
    if mode == "normal-equations":
        Ah = A.conj().T
        return EncodedProblem(Ah @ A, Ah @ b, mode, n)
    rhs = np.concatenate([b, np.zeros(n, dtype=b.dtype)])
    return EncodedProblem(dilate(A), rhs, mode, n)


def spectral_prescale(
    matrix, fmt: FixedPointFormat, target: float | None = DEFAULT_PRESCALE_TARGET
) -> tuple[np.ndarray, float]:
    """Shrink `matrix` so its Gershgorin bound is at most ``fmt.prescale_limit(target)``.

    Returns ``(s * matrix, s)`` with ``s <= 1``; a matrix already inside the
    limit is returned unchanged with ``s = 1``. Solutions of the scaled
    system are ``1/s`` times the original ones, and since read-out only
    yields a direction the factor needs no undoing.
    """
    matrix = as_matrix(matrix)
    bound = gershgorin_bound(matrix)
    limit = fmt.prescale_limit(target)
    if bound <= limit or bound == 0.0:
        return matrix, 1.0
    s = limit / bound
    return matrix * s, s


def rescale_to_classical(x_hat, A, b) -> np.ndarray:
    """Scale a normalized solution direction to best fit ``A x = b``.

    The factor ``alpha = <A x_hat, b> / ||A x_hat||^2`` minimizes
    ``||A (alpha x_hat) - b||_2`` over scalars.
    """
    x_hat = np.asarray(x_hat)
    Ax = as_matrix(A, square=False) @ x_hat
    denom = np.vdot(Ax, Ax).real
    if np.sqrt(denom) < 1e-14 * max(np.linalg.norm(x_hat), 1e-300):
        raise DegenerateDirectionError("A x_hat vanishes; the direction carries no scale")
    alpha = np.vdot(Ax, np.asarray(b)) / denom
    if not np.iscomplexobj(x_hat) and not np.iscomplexobj(A) and not np.iscomplexobj(b):
        alpha = alpha.real
    return alpha * x_hat


def normalize(v: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise DegenerateDirectionError("solution direction is the zero vector")
    return v / nrm


def real_if_real(v: np.ndarray, *inputs, tol: float = 1e-9) -> np.ndarray:
    """Drop a negligible imaginary part when every input was real."""
    if any(np.iscomplexobj(x) for x in inputs):
        return v
    if np.iscomplexobj(v):
        scale = max(np.max(np.abs(v), initial=0.0), 1e-300)
        if np.max(np.abs(v.imag), initial=0.0) <= tol * scale:
            return v.real.copy()
    return v


@dataclass
class QLSSResult:
    solution: np.ndarray
    direction: np.ndarray
    success_probability: float
    postselect_attempts: int = 0
    diagnostics: dict[str, Any] = field(default_factory=dict)
