"""Classical emulation of the comparator-based QLSS.

Only the two approximation steps of the quantum algorithm are reproduced:
eigenvalues are rounded to the m-bit fixed-point grid, and each rounded
eigenvalue is inverted by counting the multipliers ``j < 2**m`` whose
product with the mantissa stays below ``2**m``. No quantum dynamics (and
hence no phase-estimation leakage) is simulated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import (
    QLSSResult,
    encode_problem,
    normalize,
    real_if_real,
    rescale_to_classical,
    resolve_mode,
    spectral_prescale,
)
from .errors import NotPositiveDefiniteError, OutOfRangeError, ZeroVectorError
from .fixedpoint import DEFAULT_PRESCALE_TARGET, FixedPointFormat
from .tensor import as_matrix, gershgorin_bound, hermitian_eigendecompose

MAX_MODEL_BITS = 60  # counts are exact in int64 up to here


@dataclass(frozen=True)
class QuantizedEigenvalue:
    raw: float
    value: float  # rounded magnitude
    mantissa: int  # value * 2**k
    sign: int


def count_below(mantissa, m: int):
    """``|{j in [0, 2**m) : j * L < 2**m}|`` in closed form, ``min(2**m, ceil(2**m / L))``.

    ``L = 0`` gives ``2**m``. Works elementwise on integer arrays.
    """
    L = np.asarray(mantissa, dtype=np.int64)
    full = np.int64(1) << m
    safe = np.maximum(L, 1)
    c = -(-full // safe)
    return np.where(L > 0, np.minimum(c, full), full)


def count_by_enumeration(mantissa: int, m: int) -> int:
    """The same count by testing every multiplier; O(2**m)."""
    return sum(1 for j in range(2**m) if j * mantissa < 2**m)


def _check_bits(fmt: FixedPointFormat) -> None:
    if fmt.m > MAX_MODEL_BITS:
        raise ValueError(f"model solver supports m <= {MAX_MODEL_BITS}")


def quantize_spectrum(eigenvalues, fmt: FixedPointFormat):
    """Round magnitudes to the grid (ties away from zero); returns ``(mantissas, signs)``.

    Raises
    ------
    OutOfRangeError
        Listing every magnitude that does not fit the magnitude bits.
    """
    _check_bits(fmt)
    lam = np.asarray(eigenvalues, dtype=float)
    mag = np.abs(lam)
    scaled = mag * 2.0**fmt.k
    L = np.floor(scaled + 0.5).astype(np.int64)
    bad = (mag >= fmt.range_limit) | (L >= (np.int64(1) << fmt.magnitude_bits))
    if np.any(bad):
        vals = lam[bad]
        raise OutOfRangeError(
            f"{vals.size} eigenvalue(s) outside the representable range (|lam| < {fmt.range_limit}): "
            f"{', '.join(f'{v:.6g}' for v in vals[:8])}",
            vals,
        )
    signs = np.where(lam < 0, -1, 1).astype(np.int64)
    return L, signs


def quantize_eigenvalue(lam: float, fmt: FixedPointFormat) -> QuantizedEigenvalue:
    L, s = quantize_spectrum([lam], fmt)
    return QuantizedEigenvalue(float(lam), float(L[0]) * fmt.resolution, int(L[0]), int(s[0]))


def inverse_factors(mantissas, signs, fmt: FixedPointFormat) -> np.ndarray:
    """``sign * count * 2**(k - m)``: the approximations of ``1 / lam``."""
    c = count_below(mantissas, fmt.m).astype(float)
    return np.asarray(signs) * c * 2.0 ** (fmt.k - fmt.m)


def invert_by_counting(q: QuantizedEigenvalue, fmt: FixedPointFormat) -> float:
    return float(inverse_factors([q.mantissa], [q.sign], fmt)[0])


def model_qlss_solve(
    A,
    b,
    m: int | FixedPointFormat,
    mode: str = "auto",
    *,
    prescale: bool = True,
    prescale_target: float | None = DEFAULT_PRESCALE_TARGET,
    signed_clock: bool = False,
    use_svd: bool = True,
) -> QLSSResult:
    """Solve ``A x = b`` approximately the way the comparator QLSS would.

    Parameters
    ----------
    A, b
        The linear system.
    m
        Clock width (or a ready-made format; its ``signed`` flag is then used).
    mode
        ``hermitian-pd``, ``normal-equations``, ``dilation`` or ``auto``.
    prescale, prescale_target
        See :func:`qnewton.encoding.spectral_prescale`.
    signed_clock
        Dilation only: spend one clock bit on the sign like the gate-level
        circuit does. By default signs are kept separately and all ``m``
        bits hold the magnitude.
    use_svd
        Dilation only: read the spectrum off the SVD of `A` instead of
        eigendecomposing the doubled matrix. Both give the same solution.

    Returns
    -------
    QLSSResult
        ``solution`` is rescaled to fit ``A x = b``; ``diagnostics`` holds
        the per-eigenvalue quantization and inversion errors.
    """
    A = as_matrix(A)
    b = np.asarray(b).ravel()
    if not np.any(b):
        raise ZeroVectorError("right-hand side is zero")
    mode = resolve_mode(A, mode)
    if isinstance(m, FixedPointFormat):
        fmt = m
    else:
        fmt = FixedPointFormat(int(m), signed=signed_clock and mode == "dilation")
    _check_bits(fmt)

    if mode == "dilation" and use_svd:
        bound = max(gershgorin_bound(A), gershgorin_bound(A.conj().T))
        limit = fmt.prescale_limit(prescale_target)
        s = limit / bound if prescale and bound > limit else 1.0
        U, sigma, Vh = np.linalg.svd(A)
        lam = sigma * s
        L, signs = quantize_spectrum(lam, fmt)
        inv = inverse_factors(L, signs, fmt)
        coeff = U.conj().T @ b
        y = Vh.conj().T @ (inv * coeff)
        beta2 = np.abs(coeff) ** 2 / np.vdot(b, b).real
        weights = beta2  # each +-sigma pair carries half of |coeff|^2 and the same count
        spectrum = lam
        eig_count = 2 * lam.size
        formula_sum = 2.0 * np.sum(_inverse_or_clamp(L, fmt) ** 2)
        x_dir = y
    else:
        enc = encode_problem(A, b, mode, check_positive=False)
        H = enc.matrix
        if prescale:
            H, s = spectral_prescale(H, fmt, prescale_target)
        else:
            s = 1.0
        eig = hermitian_eigendecompose(H)
        lam = eig.eigenvalues
        if mode == "hermitian-pd" and lam[0] <= 0:
            raise NotPositiveDefiniteError(f"smallest eigenvalue {lam[0]:.3e} is not positive")
        L, signs = quantize_spectrum(lam, fmt)
        inv = inverse_factors(L, signs, fmt)
        V = eig.eigenvectors
        coeff = V.conj().T @ enc.rhs
        y = V @ (inv * coeff)
        weights = np.abs(coeff) ** 2 / np.vdot(enc.rhs, enc.rhs).real
        spectrum = lam
        eig_count = lam.size
        formula_sum = np.sum(_inverse_or_clamp(L, fmt) ** 2)
        x_dir = enc.decode(y)

    counts = count_below(L, fmt.m).astype(float)
    success = float(np.sum(weights * (counts / 2.0**fmt.m) ** 2))
    x_dir = real_if_real(normalize(x_dir), A, b)
    solution = rescale_to_classical(x_dir, A, b)

    mag = np.abs(spectrum)
    approx = L * fmt.resolution
    with np.errstate(divide="ignore"):
        inv_exact = np.where(mag > 0, 1.0 / mag, np.inf)
        inv_of_approx = np.where(approx > 0, 1.0 / np.maximum(approx, 1e-300), np.inf)
    diagnostics = {
        "m": fmt.m,
        "mode": mode,
        "prescale": s,
        "eigenvalues": spectrum,
        "quantized": approx * np.where(spectrum < 0, -1, 1),
        "inverses": inv,
        "approximation_error": np.abs(approx - mag),
        "inversion_error": np.abs(np.abs(inv) - inv_of_approx),
        "total_error": np.abs(np.abs(inv) - inv_exact),
        "underflow": int(np.sum(L == 0)),
        "formula_probability": float(formula_sum * 2.0 ** (-fmt.m) / eig_count),
    }
    return QLSSResult(solution, x_dir, success, 0, diagnostics)


def _inverse_or_clamp(L, fmt: FixedPointFormat) -> np.ndarray:
    """``1 / lam~`` with the counting clamp ``2**k`` standing in for ``lam~ = 0``."""
    L = np.asarray(L, dtype=float)
    return np.where(L > 0, 2.0**fmt.k / np.maximum(L, 1.0), 2.0**fmt.k)
