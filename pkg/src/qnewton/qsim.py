"""Gate-level statevector simulator with named registers.

Conventions
-----------
* Qubit ``q`` is bit ``q`` of the flat amplitude index (little-endian), and a
  register's value reads its qubits least significant first.
* Gates act in place on ``StateVector.amplitudes``; call ``copy()`` first when
  the previous state is still needed.
* Bitstrings in histograms are written most significant qubit first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIndexError,
    IndexOutOfRangeError,
    NonUnitaryError,
    WidthExceededError,
    ZeroProbabilityError,
    ZeroVectorError,
)

MAX_QUBITS = 26  # 2**26 complex128 amplitudes = 1 GiB
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class RegisterLayout:
    """Named, contiguous, non-overlapping qubit ranges covering ``0..n_qubits-1``."""

    registers: tuple[tuple[str, int, int], ...]  # (name, start, size)

    def __post_init__(self):
        covered = 0
        names = set()
        for name, start, size in self.registers:
            if name in names:
                raise ValueError(f"duplicate register {name!r}")
            if size < 1 or start != covered:
                raise ValueError("registers must be contiguous, non-empty and in order")
            names.add(name)
            covered += size

    @classmethod
    def from_sizes(cls, sizes: Iterable[tuple[str, int]]) -> "RegisterLayout":
        regs, start = [], 0
        for name, size in sizes:
            regs.append((name, start, int(size)))
            start += int(size)
        return cls(tuple(regs))

    @classmethod
    def qlss(cls, n: int, m: int) -> "RegisterLayout":
        """Registers of the comparator-based QLSS circuit for an ``n``-qubit input."""
        return cls.from_sizes(
            [("B", n), ("C", m), ("M1", m), ("Anc_CM", 1), ("M2", 2 * m), ("Anc_C", 1), ("Anc_flag", 1)]
        )

    @property
    def n_qubits(self) -> int:
        name, start, size = self.registers[-1]
        return start + size

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r[0] for r in self.registers)

    def span(self, name: str) -> tuple[int, int]:
        for reg, start, size in self.registers:
            if reg == name:
                return start, size
        raise KeyError(f"no register named {name!r}")

    def qubits(self, name: str) -> list[int]:
        start, size = self.span(name)
        return list(range(start, start + size))

    def size(self, name: str) -> int:
        return self.span(name)[1]


class StateVector:
    """``2**n`` complex amplitudes, optionally annotated with a register layout."""

    def __init__(self, amplitudes, layout: RegisterLayout | None = None):
        amps = np.ascontiguousarray(amplitudes, dtype=complex)
        n = int(round(math.log2(amps.size))) if amps.size else -1
        if amps.ndim != 1 or n < 0 or 2**n != amps.size:
            raise DimensionMismatchError("amplitude count must be a power of two")
        if layout is not None and layout.n_qubits != n:
            raise DimensionMismatchError("layout width does not match the amplitude count")
        self.amplitudes = amps
        self.n_qubits = n
        self.layout = layout

    @classmethod
    def zeros(cls, layout_or_n) -> "StateVector":
        layout = layout_or_n if isinstance(layout_or_n, RegisterLayout) else None
        n = layout.n_qubits if layout is not None else int(layout_or_n)
        check_width(n)
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(amps, layout)

    @classmethod
    def basis(cls, index: int, n_qubits: int, layout: RegisterLayout | None = None) -> "StateVector":
        check_width(n_qubits)
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps, layout)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.layout)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def register_values(self, name: str) -> np.ndarray:
        """Value of register `name` for every basis index."""
        start, size = self._layout().span(name)
        return (np.arange(self.amplitudes.size) >> start) & ((1 << size) - 1)

    def register_probabilities(self, name: str) -> np.ndarray:
        start, size = self._layout().span(name)
        p = self.probabilities().reshape(-1, 2**size, 2**start)
        return p.sum(axis=(0, 2))

    def _layout(self) -> RegisterLayout:
        if self.layout is None:
            raise ValueError("state has no register layout")
        return self.layout

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"


def check_width(n_qubits: int) -> None:
    if n_qubits > MAX_QUBITS:
        raise WidthExceededError(f"{n_qubits} qubits exceeds the simulator cap of {MAX_QUBITS}")


class Gate(NamedTuple):
    """One circuit operation.

    ``name`` is one of ``h x z cx ccx mcx phase cphase cu``. For ``mcx`` and
    ``cphase`` all but the last qubit are controls. For ``cu`` the qubits
    are ``(control, *target_register)`` and ``matrix`` holds the unitary.
    """

    name: str
    qubits: tuple[int, ...]
    param: float = 0.0
    matrix: np.ndarray | None = None

    def inverse(self) -> "Gate":
        if self.name in ("phase", "cphase"):
            return self._replace(param=-self.param)
        if self.name == "cu":
            return self._replace(matrix=self.matrix.conj().T)
        return self


_SELF_INVERSE_ARITY = {"h": 1, "x": 1, "z": 1, "cx": 2, "ccx": 3}


@dataclass
class Circuit:
    """An ordered gate list on ``n_qubits`` qubits."""

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def append(self, gate: Gate) -> "Circuit":
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        self.gates.extend(gates)
        return self

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)])

    def apply(self, state: StateVector) -> StateVector:
        for g in self.gates:
            apply(state, g)
        return state

    def count(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            out[g.name] = out.get(g.name, 0) + 1
        return out

    def __len__(self):
        return len(self.gates)


def _axis(n: int, q: int) -> int:
    return n - 1 - q


def _validate(n: int, qubits: Sequence[int]) -> None:
    for q in qubits:
        if not 0 <= q < n:
            raise IndexOutOfRangeError(f"qubit {q} outside 0..{n - 1}")
    if len(set(qubits)) != len(qubits):
        raise DuplicateIndexError(f"repeated qubit in {tuple(qubits)}")


def _slice(n: int, fixed: Mapping[int, int]):
    idx = [slice(None)] * n
    for q, v in fixed.items():
        idx[_axis(n, q)] = v
    return tuple(idx)


def _apply_mcx(psi: np.ndarray, n: int, controls: Sequence[int], target: int) -> None:
    fixed = {c: 1 for c in controls}
    i0 = _slice(n, {**fixed, target: 0})
    i1 = _slice(n, {**fixed, target: 1})
    tmp = psi[i0].copy()
    psi[i0] = psi[i1]
    psi[i1] = tmp


def _apply_controlled_matrix(psi: np.ndarray, n: int, control: int | None, targets: Sequence[int], U: np.ndarray):
    """Apply U to the contiguous register `targets` (little-endian), optionally controlled."""
    start, size = targets[0], len(targets)
    flat = psi.reshape(2 ** (n - start - size), 2**size, 2**start)
    if control is None:
        flat[...] = np.einsum("ij,ajb->aib", U, flat)
        return
    if control >= start + size:
        hi = control - start - size
        view = flat.reshape(2 ** (n - control - 1), 2, 2**hi, 2**size, 2**start)[:, 1]
        view[...] = np.einsum("ij,acjb->acib", U, view)
    elif control < start:
        view = flat.reshape(flat.shape[0], 2**size, 2 ** (start - control - 1), 2, 2**control)[:, :, :, 1]
        view[...] = np.einsum("ij,ajcb->aicb", U, view)
    else:
        raise DuplicateIndexError("control qubit lies inside the target register")


def apply(state: StateVector, gate: Gate) -> StateVector:
    """Apply one gate in place and return the state."""
    n = state.n_qubits
    qs = gate.qubits
    _validate(n, qs)
    psi = state.amplitudes.reshape([2] * n) if n else state.amplitudes
    name = gate.name
    if name in _SELF_INVERSE_ARITY and len(qs) != _SELF_INVERSE_ARITY[name]:
        raise ValueError(f"gate {name} expects {_SELF_INVERSE_ARITY[name]} qubits, got {len(qs)}")
    if name == "h":
        i0, i1 = _slice(n, {qs[0]: 0}), _slice(n, {qs[0]: 1})
        a, b = psi[i0].copy(), psi[i1].copy()
        psi[i0] = (a + b) / math.sqrt(2)
        psi[i1] = (a - b) / math.sqrt(2)
    elif name in ("x", "cx", "ccx", "mcx"):
        _apply_mcx(psi, n, qs[:-1], qs[-1])
    elif name == "z":
        psi[_slice(n, {qs[0]: 1})] *= -1
    elif name in ("phase", "cphase"):
        psi[_slice(n, {q: 1 for q in qs})] *= np.exp(1j * gate.param)
    elif name == "cu":
        U = gate.matrix
        targets = qs[1:]
        if U.shape != (2 ** len(targets),) * 2:
            raise DimensionMismatchError("unitary size does not match the target register")
        if list(targets) != list(range(targets[0], targets[0] + len(targets))):
            raise ValueError("controlled-unitary targets must be a contiguous ascending register")
        _apply_controlled_matrix(psi, n, qs[0], targets, U)
    else:
        raise ValueError(f"unknown gate {name!r}")
    return state


def apply_gate(state: StateVector, name: str, qubits: Sequence[int], param: float = 0.0) -> StateVector:
    """Apply a named elementary gate (``h x z cx ccx mcx phase cphase``)."""
    return apply(state, Gate(name, tuple(int(q) for q in qubits), float(param)))


def _check_unitary(U: np.ndarray) -> None:
    err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if err > UNITARY_TOL:
        raise NonUnitaryError(f"matrix deviates from unitarity by {err:.2e}")


def controlled_unitary(U, target: Sequence[int], control: int, check: bool = True) -> Gate:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] != 2 ** len(target):
        raise DimensionMismatchError(f"unitary of shape {U.shape} does not act on {len(target)} qubits")
    if check:
        _check_unitary(U)
    return Gate("cu", (int(control), *[int(q) for q in target]), matrix=U)


def apply_controlled_unitary(state: StateVector, U, target_register, control_qubit: int) -> StateVector:
    """Apply `U` to a register (name or qubit list) where `control_qubit` is ``|1>``."""
    if isinstance(target_register, str):
        target = state._layout().qubits(target_register)
    else:
        target = list(target_register)
    return apply(state, controlled_unitary(U, target, control_qubit))


def prepare_amplitude_state(b, layout: RegisterLayout, register: str = "B") -> StateVector:
    """Load ``b / ||b||`` (zero padded) into `register`, all other qubits ``|0>``."""
    b = np.asarray(b, dtype=complex).ravel()
    start, size = layout.span(register)
    if b.size > 2**size:
        raise DimensionMismatchError(f"vector of length {b.size} does not fit {size} qubits")
    nrm = np.linalg.norm(b)
    if nrm == 0.0:
        raise ZeroVectorError("cannot prepare the zero vector")
    check_width(layout.n_qubits)
    amps = np.zeros(2**layout.n_qubits, dtype=complex)
    amps[(np.arange(b.size) << start)] = b / nrm
    return StateVector(amps, layout)


@dataclass
class MeasurementOutcome:
    values: dict[str, int]
    probability: float
    post_state: StateVector

    def bitstrings(self) -> dict[str, str]:
        layout = self.post_state.layout
        return {k: format(v, f"0{layout.size(k)}b") for k, v in self.values.items()}


def projection_mask(state: StateVector, constraints: Mapping[str, int]) -> np.ndarray:
    layout = state._layout()
    idx = np.arange(state.amplitudes.size)
    mask = np.ones(idx.size, dtype=bool)
    for name, value in constraints.items():
        start, size = layout.span(name)
        if not 0 <= value < 2**size:
            raise ValueError(f"value {value} does not fit register {name!r}")
        mask &= ((idx >> start) & ((1 << size) - 1)) == value
    return mask


def post_select(state: StateVector, constraints: Mapping[str, int], min_probability: float = 1e-28) -> MeasurementOutcome:
    """Project onto registers holding the given values and renormalize.

    Raises
    ------
    ZeroProbabilityError
        If the projection norm is below ``1e-14``.
    """
    mask = projection_mask(state, constraints)
    kept = np.where(mask, state.amplitudes, 0.0)
    prob = float(np.sum(np.abs(kept) ** 2))
    if prob < min_probability:
        raise ZeroProbabilityError(f"post-selection probability {prob:.3e} is zero")
    return MeasurementOutcome(dict(constraints), prob, StateVector(kept / math.sqrt(prob), state.layout))


def make_rng(seed: int) -> np.random.Generator:
    """Philox (64-bit counter-based) generator: identical streams across platforms."""
    return np.random.Generator(np.random.Philox(int(seed)))


def sample_indices(state: StateVector, shots: int, seed: int) -> np.ndarray:
    """Counts per basis index for `shots` full-register measurements."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = state.probabilities()
    p = p / p.sum()
    return make_rng(seed).multinomial(shots, p)


def sample_measurements(state: StateVector, register, shots: int, seed: int) -> dict[str, int]:
    """Histogram of bitstrings measured on `register` (a name or list of names)."""
    names = [register] if isinstance(register, str) else list(register)
    counts = sample_indices(state, shots, seed)
    layout = state._layout()
    hits = np.nonzero(counts)[0]
    hist: dict[str, int] = {}
    for i in hits:
        key = "".join(
            format((int(i) >> layout.span(nm)[0]) & ((1 << layout.size(nm)) - 1), f"0{layout.size(nm)}b")
            for nm in names
        )
        hist[key] = hist.get(key, 0) + int(counts[i])
    return dict(sorted(hist.items()))
