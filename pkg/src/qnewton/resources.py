"""Logical qubit counts for the comparator QLSS.

With ``n = ceil(log2 N)`` system qubits and ``m = ceil(2 log2(1/eps))`` clock
bits the registers hold ``n + 4m + 3`` qubits (B, C, M1, a 2m-bit product,
three single ancillas). Non-Hermitian systems need one more qubit for the
dilation. All logarithms are evaluated exactly on rationals, so decimal
inputs such as ``1e-16`` give the mathematically correct ceiling.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

TABLE_UNKNOWNS = ("1e12", "1e16", "1e20", "1e24")
TABLE_EPSILONS = ("1e-12", "1e-16")


def _exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    return Fraction(repr(float(x)))  # shortest decimal that round-trips, e.g. 1e-12


def ceil_log2(x: Fraction) -> int:
    """Smallest integer ``e`` with ``2**e >= x`` for rational ``x > 0``."""
    if x <= 0:
        raise ValueError("argument must be positive")
    e = x.numerator.bit_length() - x.denominator.bit_length()
    while Fraction(2) ** e < x:
        e += 1
    while Fraction(2) ** (e - 1) >= x:
        e -= 1
    return e


@dataclass(frozen=True)
class ResourceEstimate:
    N: Fraction
    epsilon: Fraction
    n: int
    m: int
    q_table: int
    q_eq: int
    depth_order: str = "O(1/eps) controlled evolutions in QPE"

    def total(self, include_dilation_qubit: bool = False) -> int:
        return self.q_eq if include_dilation_qubit else self.q_table


def estimate(N, epsilon, include_dilation_qubit: bool = False) -> ResourceEstimate:
    """Qubit count for `N` unknowns at accuracy `epsilon`.

    Both totals are always filled in; `include_dilation_qubit` only selects
    which one :meth:`ResourceEstimate.total` returns by default in reports.

    Examples
    --------
    >>> e = estimate("1e24", "1e-12")
    >>> (e.n, e.m, e.q_table, e.q_eq)
    (80, 80, 403, 404)
    """
    Nq, eps = _exact(N), _exact(epsilon)
    if Nq < 2:
        raise ValueError("N must be >= 2")
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    n = ceil_log2(Nq)
    m = ceil_log2(1 / eps**2)
    q = n + 4 * m + 3
    return ResourceEstimate(Nq, eps, n, m, q, q + 1)


def _sci(x: Fraction) -> str:
    return format(float(x), ".0e").replace("e+", "e")


def table(unknowns=TABLE_UNKNOWNS, epsilons=TABLE_EPSILONS, include_dilation_qubit: bool = False):
    return [estimate(N, e, include_dilation_qubit) for N in unknowns for e in epsilons]


def to_markdown(rows, include_dilation_qubit: bool = False) -> str:
    lines = ["| N | n | eps | m | Q_total |", "|---|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {_sci(r.N)} | {r.n} | {_sci(r.epsilon)} | {r.m} | {r.total(include_dilation_qubit)} |")
    return "\n".join(lines) + "\n"


def to_csv(rows, include_dilation_qubit: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "n", "epsilon", "m", "Q_total", "Q_table", "Q_eq"])
    for r in rows:
        w.writerow([_sci(r.N), r.n, _sci(r.epsilon), r.m, r.total(include_dilation_qubit), r.q_table, r.q_eq])
    return buf.getvalue()
