"""Dense complex linear algebra used by the simulator and the model solver.

Matrices are plain numpy arrays. Functions validate their inputs and never
modify them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergenceError, NonFiniteError, NonHermitianError, SingularMatrixError

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-14
HERMITIAN_TOL = 1e-12


def as_matrix(A, square: bool = True) -> np.ndarray:
    """Return `A` as a 2-D numpy array, checking shape and finiteness."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteError("matrix has NaN or Inf entries")
    return A


def is_hermitian(A: np.ndarray, rtol: float = HERMITIAN_TOL) -> bool:
    scale = np.max(np.abs(A)) if A.size else 0.0
    return bool(np.max(np.abs(A - A.conj().T), initial=0.0) <= rtol * scale)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in ascending order; ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def _jacobi_eigh(A: np.ndarray, max_sweeps: int, tol: float):
    """Cyclic Jacobi rotations for a complex Hermitian matrix."""
    a = np.array(A, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    fro = np.linalg.norm(a)
    if n < 2 or fro == 0.0:
        return np.real(np.diag(a)).copy(), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # W = diag(1, conj(phase)) @ [[c, s], [-s, c]] zeroes a[p, q] under W^H a W
                w = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                cols = a[:, [p, q]] @ w
                a[:, p], a[:, q] = cols[:, 0], cols[:, 1]
                rows = w.conj().T @ a[[p, q], :]
                a[p, :], a[q, :] = rows[0], rows[1]
                a[p, q] = a[q, p] = 0.0
                a[p, p], a[q, q] = a[p, p].real, a[q, q].real
                vc = v[:, [p, q]] @ w
                v[:, p], v[:, q] = vc[:, 0], vc[:, 1]
    else:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off > tol * fro:
            raise NoConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal mass {off:.3e})"
            )
    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def hermitian_eigendecompose(A, method: str = "lapack") -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    A : array_like
        Square Hermitian matrix, ``max|A - A^H| <= 1e-12 max|A|``.
    method : {"lapack", "jacobi"}
        ``"lapack"`` calls ``numpy.linalg.eigh``. ``"jacobi"`` runs cyclic
        Jacobi rotations (at most 100 sweeps, stopping once the off-diagonal
        Frobenius mass drops below ``1e-14 ||A||_F``); it is slow beyond a
        few hundred unknowns and mainly serves as an independent check.

    Raises
    ------
    NonHermitianError
        If `A` is not Hermitian within tolerance.
    NoConvergenceError
        If Jacobi exhausts its sweep limit.
    """
    A = as_matrix(A)
    if not is_hermitian(A):
        raise NonHermitianError("matrix is not Hermitian")
    if method == "lapack":
        w, v = np.linalg.eigh(A)
    elif method == "jacobi":
        w, v = _jacobi_eigh(A, JACOBI_MAX_SWEEPS, JACOBI_TOL)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    if not np.iscomplexobj(A):
        v = np.real_if_close(v, tol=1000)
    return EigenDecomposition(np.asarray(w, dtype=float), v)


def matrix_exponential_unitary(A, t: float, eig: EigenDecomposition | None = None) -> np.ndarray:
    """Return ``exp(i A t)`` for Hermitian `A` via its eigendecomposition.

    A precomputed decomposition may be passed to avoid repeating it when many
    powers of the same evolution are needed (QPE).
    """
    if eig is None:
        eig = hermitian_eigendecompose(A)
    V = eig.eigenvectors
    return (V * np.exp(1j * eig.eigenvalues * t)) @ V.conj().T


def dilate(A) -> np.ndarray:
    """Hermitian dilation ``[[0, A], [A^H, 0]]``."""
    A = as_matrix(A)
    n = A.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=A.dtype)
    out[:n, n:] = A
    out[n:, :n] = A.conj().T
    return out


def condition_number(A) -> float:
    """Ratio of extreme singular values of `A`.

    These are the moduli of the dilation's eigenvalues, so the value is the
    same whichever encoding a solver uses.

    Raises
    ------
    SingularMatrixError
        If the smallest singular value is below ``1e-14`` times the largest.
    """
    A = as_matrix(A)
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0 or s[-1] < 1e-14 * s[0]:
        raise SingularMatrixError("matrix is singular to working precision")
    return float(s[0] / s[-1])


def gershgorin_bound(A) -> float:
    """Upper bound on the spectral radius: largest absolute row sum."""
    A = as_matrix(A)
    return float(np.max(np.sum(np.abs(A), axis=1), initial=0.0))
