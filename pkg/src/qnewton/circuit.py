"""Gate-level comparator QLSS on the statevector simulator.

Pipeline on the registers of :meth:`RegisterLayout.qlss`::

    load b into B
    QPE of exp(i A t) with clock C              (C <- lam * 2**k)
    [signed] C <- |C| keeping the sign bit
    H on M1                                      (M1 <- uniform j)
    M2 <- M1 * C
    Anc_flag <- [M2 >= 2**m]
    [signed] Z on the sign bit
    undo everything before the comparison
    keep C = M1 = M2 = ancillas = Anc_flag = 0

The kept branch holds ``sum_i beta_i * count_i / 2**m * |u_i>`` with
``count_i = |{j < 2**m : j * L_i < 2**m}|``, which is proportional to
``A^-1 b`` up to the fixed-point error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arith import comparator_pow2_gates, conditional_negate_gates, multiplier_gates
from .encoding import (
    QLSSResult,
    encode_problem,
    normalize,
    real_if_real,
    rescale_to_classical,
    spectral_prescale,
)
from .errors import RangeViolationError, SingularMatrixError, ZeroProbabilityError, ZeroVectorError
from .fixedpoint import DEFAULT_PRESCALE_TARGET, FixedPointFormat
from .qsim import (
    MAX_QUBITS,
    Circuit,
    Gate,
    RegisterLayout,
    check_width,
    controlled_unitary,
    prepare_amplitude_state,
    sample_indices,
)
from .tensor import EigenDecomposition, condition_number, hermitian_eigendecompose, matrix_exponential_unitary

READOUTS = ("exact", "sampled")


@dataclass(frozen=True)
class QLSSConfig:
    """Settings for :func:`run_qlss`.

    ``readout="exact"`` returns the post-selected amplitudes; ``"sampled"``
    measures `shots` times with a Philox stream seeded by `seed` and keeps
    the shots that pass post-selection.
    """

    m: int
    mode: str = "auto"
    readout: str = "exact"
    shots: int = 1024
    seed: int = 0
    prescale: bool = True
    prescale_target: float | None = DEFAULT_PRESCALE_TARGET

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if self.readout == "sampled" and self.shots < 1:
            raise ValueError("sampled read-out needs shots >= 1")


def _swap(a: int, b: int) -> list[Gate]:
    return [Gate("cx", (a, b)), Gate("cx", (b, a)), Gate("cx", (a, b))]


def qft_gates(qubits) -> list[Gate]:
    """``|y> -> 2**(-m/2) sum_c exp(2 pi i y c / 2**m) |c>`` on a little-endian register."""
    q = list(qubits)
    m = len(q)
    gates: list[Gate] = []
    for j in reversed(range(m)):
        gates.append(Gate("h", (q[j],)))
        for l in reversed(range(j)):
            gates.append(Gate("cphase", (q[l], q[j]), math.pi / 2 ** (j - l)))
    for i in range(m // 2):
        gates += _swap(q[i], q[m - 1 - i])
    return gates


def build_qft(m: int, inverse: bool = False) -> Circuit:
    c = Circuit(m, qft_gates(range(m)))
    return c.inverse() if inverse else c


def qpe_gates(eig: EigenDecomposition, fmt: FixedPointFormat, target, clock) -> list[Gate]:
    """Phase estimation of ``exp(i A t)``, ``t = fmt.evolution_time``, writing into `clock`.

    An eigenvector with eigenvalue ``lam`` leaves ``lam * 2**k`` (two's
    complement modulo ``2**m``) in the clock when that number is an integer.
    """
    clock = list(clock)
    gates = [Gate("h", (c,)) for c in clock]
    t = fmt.evolution_time
    for j, c in enumerate(clock):
        U = matrix_exponential_unitary(None, t * 2**j, eig)
        gates.append(controlled_unitary(U, list(target), c, check=False))
    inv_qft = [g.inverse() for g in reversed(qft_gates(clock))]
    return gates + inv_qft


def build_qpe(A, fmt: FixedPointFormat, layout: RegisterLayout | None = None) -> Circuit:
    """QPE circuit on ``B`` (the matrix register) and ``C`` (the clock).

    Raises
    ------
    RangeViolationError
        If an eigenvalue of `A` does not fit the clock.
    """
    eig = hermitian_eigendecompose(A)
    _check_range(eig.eigenvalues, fmt)
    n = int(round(math.log2(eig.eigenvalues.size)))
    if layout is None:
        layout = RegisterLayout.from_sizes([("B", n), ("C", fmt.m)])
    return Circuit(layout.n_qubits, qpe_gates(eig, fmt, layout.qubits("B"), layout.qubits("C")))


def _check_range(eigenvalues, fmt: FixedPointFormat) -> None:
    mag = np.abs(np.asarray(eigenvalues))
    over = mag[mag > fmt.max_magnitude + 0.5 * fmt.resolution]
    if over.size:
        raise RangeViolationError(
            f"{over.size} eigenvalue(s) exceed the clock range {fmt.max_magnitude:g} "
            f"(largest {over.max():.6g}); enable prescaling or raise m"
        )
    if not fmt.signed and np.any(np.asarray(eigenvalues) < -0.5 * fmt.resolution):
        raise RangeViolationError("negative eigenvalue in an unsigned clock")


def _pad(matrix: np.ndarray, rhs: np.ndarray, fill: float) -> tuple[np.ndarray, np.ndarray, int]:
    """Embed into the next power of two with ``fill * I`` on the extra diagonal."""
    d = matrix.shape[0]
    n = max(1, math.ceil(math.log2(d)))
    D = 2**n
    if D == d:
        return matrix, rhs, n
    out = np.zeros((D, D), dtype=matrix.dtype)
    out[:d, :d] = matrix
    out[np.arange(d, D), np.arange(d, D)] = fill
    return out, np.concatenate([rhs, np.zeros(D - d, dtype=rhs.dtype)]), n


def qlss_circuit(eig: EigenDecomposition, fmt: FixedPointFormat, layout: RegisterLayout) -> Circuit:
    """Everything after state preparation, ending with the post-selection registers cleaned up."""
    m = fmt.m
    B, C, M1 = layout.qubits("B"), layout.qubits("C"), layout.qubits("M1")
    M2 = layout.qubits("M2")
    anc_cm = layout.qubits("Anc_CM")[0]
    work = layout.qubits("Anc_C")[0]
    flag = layout.qubits("Anc_flag")[0]

    forward = qpe_gates(eig, fmt, B, C)
    if fmt.signed:
        magnitude, sign = C[:-1], C[-1]
        forward += conditional_negate_gates(magnitude, sign, dirty=M2)
    else:
        magnitude = C
    forward += [Gate("h", (q,)) for q in M1]
    forward += multiplier_gates(M1, magnitude, M2, anc_cm)

    middle = comparator_pow2_gates(M2, m, flag, work, dirty=M1)
    if fmt.signed:
        middle.append(Gate("z", (C[-1],)))
    backward = [g.inverse() for g in reversed(forward)]
    return Circuit(layout.n_qubits, forward + middle + backward)


def run_qlss(A, b, config: QLSSConfig) -> QLSSResult:
    """Solve ``A x = b`` with the gate-level QLSS.

    Returns
    -------
    QLSSResult
        ``direction`` is the unit-norm read-out, ``solution`` the rescaled
        vector. ``success_probability`` is the exact weight of the kept
        branch in both read-out modes.

    Raises
    ------
    WidthExceededError
        If the registers need more than ``MAX_QUBITS`` qubits.
    RangeViolationError
        If prescaling is off and the spectrum does not fit the clock.
    ZeroProbabilityError
        If no amplitude (or, when sampling, no shot) survives post-selection.
    """
    A = np.asarray(A)
    b = np.asarray(b).ravel()
    if not np.any(b):
        raise ZeroVectorError("right-hand side is zero")
    enc = encode_problem(A, b, config.mode)
    fmt = FixedPointFormat(config.m, signed=enc.signed)
    H, s = spectral_prescale(enc.matrix, fmt, config.prescale_target) if config.prescale else (enc.matrix, 1.0)
    H, rhs, n = _pad(H, enc.rhs, fmt.resolution)

    layout = RegisterLayout.qlss(n, fmt.m)
    check_width(layout.n_qubits)
    eig = hermitian_eigendecompose(H)
    _check_range(eig.eigenvalues, fmt)

    state = prepare_amplitude_state(rhs, layout)
    qlss_circuit(eig, fmt, layout).apply(state)
    kept = state.amplitudes[: 2**n].copy()
    success = float(np.vdot(kept, kept).real)
    if success < 1e-28:
        raise ZeroProbabilityError(f"post-selection probability {success:.3e} is zero")

    accepted = None
    if config.readout == "exact":
        y = kept
    else:
        counts = sample_indices(state, config.shots, config.seed)
        hits = counts[: 2**n]
        accepted = int(hits.sum())
        if accepted == 0:
            raise ZeroProbabilityError(f"no shot out of {config.shots} passed post-selection")
        phase = np.where(np.abs(kept) > 0, kept / np.maximum(np.abs(kept), 1e-300), 1.0)
        y = np.sqrt(hits / accepted) * phase

    x_dir = real_if_real(normalize(enc.decode(y[: enc.matrix.shape[0]])), A, b)
    solution = rescale_to_classical(x_dir, A, b)

    lam = eig.eigenvalues
    L = np.floor(np.abs(lam) * 2.0**fmt.k + 0.5)
    small = L == 0
    inv_clamped = 2.0**fmt.k / np.maximum(L, 1.0)
    try:
        kappa = condition_number(A)
    except SingularMatrixError:
        kappa = math.inf
    diagnostics = {
        "m": fmt.m,
        "mode": enc.mode,
        "qubits": layout.n_qubits,
        "kappa": kappa,
        "t": fmt.evolution_time,
        "prescale": s,
        "range_violations": int(np.sum(small)),
        "formula_probability": float(
            np.sum((2.0 ** (-fmt.m / 2) * inv_clamped) ** 2) / lam.size
        ),
        "shots": config.shots if config.readout == "sampled" else 0,
        "accepted_shots": accepted,
    }
    attempts = config.shots if config.readout == "sampled" else 0
    return QLSSResult(solution, x_dir, success, attempts, diagnostics)


def max_clock_bits(n_unknowns: int, mode: str = "hermitian-pd") -> int:
    """Largest ``m`` that fits under the simulator cap for a system of the given size."""
    d = 2 * n_unknowns if mode == "dilation" else n_unknowns
    n = max(1, math.ceil(math.log2(d)))
    return (MAX_QUBITS - n - 3) // 4
