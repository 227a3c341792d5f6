import math

import numpy as np
import pytest

from qnewton.errors import (
    DimensionMismatchError,
    DuplicateIndexError,
    IndexOutOfRangeError,
    NonUnitaryError,
    WidthExceededError,
    ZeroProbabilityError,
    ZeroVectorError,
)
from qnewton.qsim import (
    MAX_QUBITS,
    Circuit,
    Gate,
    RegisterLayout,
    StateVector,
    apply,
    apply_controlled_unitary,
    apply_gate,
    check_width,
    controlled_unitary,
    post_select,
    prepare_amplitude_state,
    sample_indices,
    sample_measurements,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]])
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
P1 = np.diag([0, 1])
P0 = np.diag([1, 0])


def kron_all(ops):
    # ops[q] acts on qubit q; qubit 0 is the least significant bit
    out = np.array([[1.0]])
    for op in ops:
        out = np.kron(op, out)
    return out


def dense(gate, n):
    """Independent matrix construction of a gate from Kronecker products."""
    if gate.name in ("h", "x", "z"):
        op = {"h": H, "x": X, "z": np.diag([1, -1])}[gate.name]
        return kron_all([op if q == gate.qubits[0] else I2 for q in range(n)])
    if gate.name in ("cx", "ccx", "mcx"):
        *ctrl, tgt = gate.qubits
        on = kron_all([P1 if q in ctrl else (X if q == tgt else I2) for q in range(n)])
        proj = kron_all([P1 if q in ctrl else I2 for q in range(n)])
        return np.eye(2**n) - proj + on
    if gate.name in ("phase", "cphase"):
        proj = kron_all([P1 if q in gate.qubits else I2 for q in range(n)])
        return np.eye(2**n) + (np.exp(1j * gate.param) - 1) * proj
    raise ValueError(gate.name)


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(v / np.linalg.norm(v))


@pytest.mark.parametrize(
    "gate",
    [
        Gate("h", (1,)),
        Gate("x", (0,)),
        Gate("z", (2,)),
        Gate("cx", (2, 0)),
        Gate("cx", (0, 3)),
        Gate("ccx", (3, 0, 1)),
        Gate("mcx", (0, 1, 3, 2)),
        Gate("phase", (1,), 0.7),
        Gate("cphase", (3, 1), -1.3),
    ],
)
def test_gate_matches_kronecker_oracle(gate):
    n = 4
    psi = random_state(n, 0)
    expected = dense(gate, n) @ psi.amplitudes
    np.testing.assert_allclose(apply(psi, gate).amplitudes, expected, atol=1e-12)


def test_little_endian_indexing():
    s = StateVector.zeros(3)
    apply_gate(s, "x", [2])
    assert np.argmax(np.abs(s.amplitudes)) == 4


def test_bell_state():
    s = StateVector.zeros(2)
    apply_gate(s, "h", [0])
    apply_gate(s, "cx", [0, 1])
    np.testing.assert_allclose(s.amplitudes, [1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2)], atol=1e-15)


def test_circuit_inverse_restores_state():
    rng = np.random.default_rng(5)
    names = ["h", "x", "z", "cx", "ccx", "phase", "cphase"]
    arity = {"h": 1, "x": 1, "z": 1, "cx": 2, "ccx": 3, "phase": 1, "cphase": 2}
    c = Circuit(4)
    for _ in range(60):
        name = names[rng.integers(len(names))]
        qs = tuple(int(q) for q in rng.choice(4, arity[name], replace=False))
        c.append(Gate(name, qs, float(rng.uniform(-3, 3))))
    psi = random_state(4, 1)
    out = c.inverse().apply(c.apply(psi.copy()))
    np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-12)
    assert sum(c.count().values()) == len(c) == 60


@pytest.mark.parametrize("control", [0, 4])
def test_controlled_unitary_matches_oracle(control):
    rng = np.random.default_rng(control)
    M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    U, _ = np.linalg.qr(M)
    targets = [1, 2] if control == 0 else [0, 1]
    n = 5
    psi = random_state(n, 2)
    # oracle: loop over basis states
    expected = np.zeros_like(psi.amplitudes)
    for idx in range(2**n):
        if not (idx >> control) & 1:
            expected[idx] += psi.amplitudes[idx]
            continue
        sub = sum(((idx >> q) & 1) << k for k, q in enumerate(targets))
        rest = idx & ~sum(1 << q for q in targets)
        for out in range(4):
            j = rest | sum(((out >> k) & 1) << q for k, q in enumerate(targets))
            expected[j] += U[out, sub] * psi.amplitudes[idx]
    apply_controlled_unitary(psi, U, targets, control)
    np.testing.assert_allclose(psi.amplitudes, expected, atol=1e-12)


def test_controlled_unitary_by_register_name():
    layout = RegisterLayout.from_sizes([("B", 1), ("C", 1)])
    s = StateVector.zeros(layout)
    apply_gate(s, "x", [1])
    apply_controlled_unitary(s, X, "B", 1)
    assert s.register_values("B")[np.argmax(np.abs(s.amplitudes))] == 1


def test_errors():
    s = StateVector.zeros(2)
    with pytest.raises(IndexOutOfRangeError):
        apply_gate(s, "x", [2])
    with pytest.raises(DuplicateIndexError):
        apply_gate(s, "cx", [1, 1])
    with pytest.raises(NonUnitaryError):
        controlled_unitary(np.array([[1, 1], [0, 1]]), [0], 1)
    with pytest.raises(DimensionMismatchError):
        controlled_unitary(np.eye(4), [0], 1)
    with pytest.raises(DimensionMismatchError):
        StateVector(np.ones(3))
    with pytest.raises(ZeroVectorError):
        prepare_amplitude_state(np.zeros(2), RegisterLayout.from_sizes([("B", 1)]))
    with pytest.raises(WidthExceededError):
        check_width(MAX_QUBITS + 1)
    with pytest.raises(ValueError):
        apply(s, Gate("swap", (0, 1)))


def test_layout():
    layout = RegisterLayout.qlss(3, 4)
    assert layout.n_qubits == 3 + 4 * 4 + 3
    assert layout.names == ("B", "C", "M1", "Anc_CM", "M2", "Anc_C", "Anc_flag")
    assert layout.qubits("M2") == list(range(3 + 4 + 4 + 1, 3 + 4 + 4 + 1 + 8))
    with pytest.raises(ValueError):
        RegisterLayout((("a", 0, 1), ("b", 2, 1)))
    with pytest.raises(KeyError):
        layout.span("D")


def test_prepare_and_register_probabilities():
    layout = RegisterLayout.from_sizes([("B", 2), ("C", 1)])
    s = prepare_amplitude_state([3.0, 4.0], layout)
    np.testing.assert_allclose(s.register_probabilities("B"), [0.36, 0.64, 0, 0])
    np.testing.assert_allclose(s.register_probabilities("C"), [1, 0])
    assert s.norm() == pytest.approx(1.0)


def test_post_select():
    layout = RegisterLayout.from_sizes([("a", 1), ("b", 1)])
    s = StateVector.zeros(layout)
    apply_gate(s, "h", [0])
    apply_gate(s, "cx", [0, 1])
    out = post_select(s, {"b": 1})
    assert out.probability == pytest.approx(0.5)
    np.testing.assert_allclose(out.post_state.amplitudes, [0, 0, 0, 1], atol=1e-15)
    assert out.bitstrings() == {"b": "1"}
    apply_gate(s, "cx", [0, 1])
    apply_gate(s, "h", [0])
    with pytest.raises(ZeroProbabilityError):
        post_select(s, {"a": 1})


def test_sampling_is_seeded_and_consistent():
    layout = RegisterLayout.from_sizes([("a", 2), ("b", 1)])
    s = prepare_amplitude_state([1.0, 2.0, 0.0, 1.0], layout, register="a")
    h1 = sample_measurements(s, "a", 20_000, seed=11)
    h2 = sample_measurements(s, "a", 20_000, seed=11)
    assert h1 == h2
    assert sum(h1.values()) == 20_000
    assert list(h1) == sorted(h1)
    assert "10" not in h1  # zero amplitude never sampled
    assert h1["01"] / 20_000 == pytest.approx(4 / 6, abs=0.02)
    assert sample_measurements(s, "a", 100, seed=12) != sample_measurements(s, "a", 100, seed=13)
    counts = sample_indices(s, 50, seed=0)
    assert counts.sum() == 50
    with pytest.raises(ValueError):
        sample_indices(s, 0, seed=0)


def test_sample_multiple_registers_msb_first():
    layout = RegisterLayout.from_sizes([("a", 1), ("b", 2)])
    s = StateVector.basis(0b101, 3, layout)  # a = 1, b = 2
    assert sample_measurements(s, ["b", "a"], 5, seed=0) == {"101": 5}
