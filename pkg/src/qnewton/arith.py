"""Reversible integer arithmetic built from X, CX and Toffoli gates.

All circuits are permutations of computational basis states, so besides
statevector simulation they can be evaluated on bit patterns directly
(``ArithmeticCircuit.permute``), which is how truth tables are enumerated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ProductRegisterNotZeroError
from .qsim import Circuit, Gate, StateVector

_CLASSICAL = ("x", "cx", "ccx", "mcx")


def _x(q):
    return Gate("x", (q,))


def _cx(c, t):
    return Gate("cx", (c, t))


def _ccx(c1, c2, t):
    return Gate("ccx", (c1, c2, t))


def mcx_gates(controls: Sequence[int], target: int, dirty: Sequence[int] = ()) -> list[Gate]:
    """Multi-controlled X decomposed into Toffolis.

    Three or more controls borrow ``len(controls) - 2`` qubits from `dirty`;
    their contents may be arbitrary and are restored exactly.
    """
    c = list(controls)
    r = len(c)
    if r == 0:
        return [_x(target)]
    if r == 1:
        return [_cx(c[0], target)]
    if r == 2:
        return [_ccx(c[0], c[1], target)]
    a = list(dirty)[: r - 2]
    if len(a) < r - 2:
        raise ValueError(f"{r}-controlled X needs {r - 2} borrowed qubits, got {len(a)}")
    if len({*c, target, *a}) != r + 1 + len(a):
        raise ValueError("borrowed qubits overlap the controls or target")

    def ladder_down():
        return [_ccx(c[i + 2], a[i], a[i + 1]) for i in reversed(range(r - 3))]

    def ladder_up():
        return [_ccx(c[i + 2], a[i], a[i + 1]) for i in range(r - 3)]

    top = _ccx(c[r - 1], a[r - 3], target)
    base = _ccx(c[0], c[1], a[0])
    half = ladder_down() + [base] + ladder_up()
    return [top] + half + [top] + half


def adder_gates(
    a: Sequence[int], b: Sequence[int], ancilla: int, carry: int | None = None, control: int | None = None
) -> list[Gate]:
    """Ripple-carry addition ``b <- (a + b) mod 2**w`` (MAJ/UMA chain).

    With `carry` the carry-out is XORed into that qubit. With `control` the
    addition happens only where the control is set: the MAJ chain and its
    mirror cancel, and only the sum-forming CNOTs of each UMA stage (plus the
    carry copy) are controlled.
    """
    if len(a) != len(b) or not a:
        raise ValueError("operand registers must have equal, non-zero width")
    gates: list[Gate] = []
    prev = ancilla
    for ai, bi in zip(a, b):
        gates += [_cx(ai, bi), _cx(ai, prev), _ccx(prev, bi, ai)]  # MAJ
        prev = ai
    if carry is not None:
        gates.append(_cx(a[-1], carry) if control is None else _ccx(control, a[-1], carry))
    for i in reversed(range(len(a))):
        ai, bi = a[i], b[i]
        prev = ancilla if i == 0 else a[i - 1]
        if control is None:
            gates += [_ccx(prev, bi, ai), _cx(ai, prev), _cx(prev, bi)]  # UMA
        else:
            gates += [_ccx(prev, bi, ai), _cx(ai, prev), _cx(ai, bi), _ccx(control, ai, bi), _ccx(control, prev, bi)]
    return gates


def multiplier_gates(a: Sequence[int], x: Sequence[int], product: Sequence[int], ancilla: int) -> list[Gate]:
    """Shift-and-add ``product <- product + a * x`` for a product register starting at zero.

    Bit ``i`` of `x` controls the addition of `a` into ``product[i : i + len(a)]``
    with its carry landing in ``product[i + len(a)]``, which is still zero
    at that point.
    """
    wa, wx = len(a), len(x)
    if len(product) < wa + wx:
        raise ValueError(f"product register needs {wa + wx} qubits, got {len(product)}")
    gates: list[Gate] = []
    for i, xi in enumerate(x):
        window = product[i : i + wa]
        gates += adder_gates(a, window, ancilla, carry=product[i + wa], control=xi)
    return gates


def comparator_pow2_gates(
    product: Sequence[int], threshold_exponent: int, flag: int, work: int, dirty: Sequence[int] = ()
) -> list[Gate]:
    """Flip `flag` iff ``value(product) >= 2**threshold_exponent``.

    With a power-of-two threshold the comparison reduces to an OR over the
    high bits. It is evaluated as a multi-controlled X on the negated high
    bits into the clean `work` qubit, copied (inverted) into `flag` and then
    uncomputed, so `work` returns to zero.
    """
    p = len(product)
    if not 0 < threshold_exponent <= p:
        raise ValueError("threshold exponent must lie in 1..len(product)")
    high = list(product[threshold_exponent:])
    if not high:  # values never reach 2**p
        return []
    negate = [_x(q) for q in high]
    test = mcx_gates(high, work, dirty)
    return negate + test + [_x(flag), _cx(work, flag)] + test + negate


def conditional_negate_gates(register: Sequence[int], sign: int, dirty: Sequence[int] = ()) -> list[Gate]:
    """Two's-complement negation of `register` where `sign` is ``|1>``.

    Implemented as controlled bitwise NOT followed by a controlled +1
    (a cascade of multi-controlled X from the top bit down).
    """
    reg = list(register)
    gates = [_cx(sign, q) for q in reg]
    for i in reversed(range(len(reg))):
        controls = [sign] + reg[:i]
        spare = [q for q in dirty if q not in controls and q != reg[i]]
        gates += mcx_gates(controls, reg[i], spare)
    return gates


@dataclass(frozen=True)
class ArithmeticCircuit:
    """A reversible circuit with named operand registers.

    ``ancillas`` must start and end in ``|0>``; ``borrowed`` qubits may hold
    anything and are restored; ``require_zero`` registers must be ``|0>`` on
    input for the circuit's arithmetic meaning to hold.
    """

    n_qubits: int
    gates: tuple[Gate, ...]
    registers: dict[str, tuple[int, ...]]
    ancillas: tuple[int, ...] = ()
    borrowed: tuple[int, ...] = ()
    require_zero: tuple[str, ...] = field(default=())

    def inverse(self) -> "ArithmeticCircuit":
        return ArithmeticCircuit(
            self.n_qubits,
            tuple(g.inverse() for g in reversed(self.gates)),
            self.registers,
            self.ancillas,
            self.borrowed,
            (),
        )

    def circuit(self) -> Circuit:
        return Circuit(self.n_qubits, list(self.gates))

    def apply(self, state: StateVector) -> StateVector:
        return self.circuit().apply(state)

    def permute(self, indices) -> np.ndarray:
        """Image of computational basis indices under the circuit (classical evaluation)."""
        idx = np.array(indices, dtype=np.int64, copy=True)
        for g in self.gates:
            if g.name not in _CLASSICAL:
                raise ValueError(f"gate {g.name} is not a classical permutation")
            *controls, target = g.qubits
            hit = np.ones(idx.shape, dtype=bool)
            for c in controls:
                hit &= ((idx >> c) & 1).astype(bool)
            idx ^= hit.astype(np.int64) << target
        return idx

    def encode(self, **values: int) -> int:
        index = 0
        for name, v in values.items():
            qs = self.registers[name]
            if not 0 <= v < 2 ** len(qs):
                raise ValueError(f"value {v} does not fit register {name!r}")
            for bit, q in enumerate(qs):
                index |= ((v >> bit) & 1) << q
        return index

    def decode(self, index: int) -> dict[str, int]:
        out = {}
        for name, qs in self.registers.items():
            out[name] = sum(((index >> q) & 1) << bit for bit, q in enumerate(qs))
        return out

    def evaluate(self, **values: int) -> dict[str, int]:
        """Run the circuit on one basis input and decode all registers."""
        for name in self.require_zero:
            if values.get(name, 0) != 0:
                raise ProductRegisterNotZeroError(f"register {name!r} must start at zero")
        index = int(self.permute([self.encode(**values)])[0])
        return self.decode(index)


def build_adder(width: int, carry: bool = False, controlled: bool = False) -> ArithmeticCircuit:
    """``|a>|b> -> |a>|(a+b) mod 2**w>``, optionally with carry-out and a control qubit."""
    if width < 1:
        raise ValueError("width must be >= 1")
    a = tuple(range(width))
    b = tuple(range(width, 2 * width))
    anc = 2 * width
    regs = {"a": a, "b": b}
    nxt = anc + 1
    carry_q = ctrl_q = None
    if carry:
        carry_q = nxt
        regs["carry"] = (carry_q,)
        nxt += 1
    if controlled:
        ctrl_q = nxt
        regs["control"] = (ctrl_q,)
        nxt += 1
    gates = adder_gates(a, b, anc, carry_q, ctrl_q)
    return ArithmeticCircuit(nxt, tuple(gates), regs, ancillas=(anc,))


def build_multiplier(width: int, x_width: int | None = None) -> ArithmeticCircuit:
    """``|a>|x>|0> -> |a>|x>|a*x>`` with a ``2w``-qubit product register.

    `x_width` may be smaller than `width` (used for sign-magnitude clocks);
    the product register keeps ``2 * width`` qubits either way.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    xw = width if x_width is None else x_width
    if not 1 <= xw <= width:
        raise ValueError("x_width must lie in 1..width")
    a = tuple(range(width))
    x = tuple(range(width, width + xw))
    prod = tuple(range(width + xw, width + xw + 2 * width))
    anc = width + xw + 2 * width
    gates = multiplier_gates(a, x, prod, anc)
    return ArithmeticCircuit(
        anc + 1, tuple(gates), {"a": a, "x": x, "product": prod}, ancillas=(anc,), require_zero=("product",)
    )


def build_comparator_pow2(product_width: int, threshold_exponent: int) -> ArithmeticCircuit:
    """Flag ``product >= 2**threshold_exponent`` with one clean work qubit.

    Borrowed qubits (needed once more than two high bits are tested) are
    placed after the flag and work qubits.
    """
    if not 0 < threshold_exponent <= product_width:
        raise ValueError("need 0 < threshold_exponent <= product_width")
    prod = tuple(range(product_width))
    flag, work = product_width, product_width + 1
    n_high = product_width - threshold_exponent
    borrowed = tuple(range(product_width + 2, product_width + 2 + max(0, n_high - 2)))
    gates = comparator_pow2_gates(prod, threshold_exponent, flag, work, borrowed)
    regs = {"product": prod, "flag": (flag,)}
    if borrowed:
        regs["borrowed"] = borrowed
    return ArithmeticCircuit(product_width + 2 + len(borrowed), tuple(gates), regs, ancillas=(work,), borrowed=borrowed)
