"""Fixed-point eigenvalue encoding shared by the circuit and the model solver."""
from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_PRESCALE_TARGET = 4.0


@dataclass(frozen=True)
class FixedPointFormat:
    """``m`` clock bits: ``k = floor(m/2)`` fractional and ``ceil(m/2)`` integer bits.

    A value ``lam`` is stored as the integer mantissa ``L = lam * 2**k``.
    In signed mode the clock holds ``L`` in two's complement, which leaves
    ``m - 1`` bits for the magnitude.
    """

    m: int
    signed: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.signed and self.m < 2:
            raise ValueError("signed encoding needs m >= 2")

    @property
    def k(self) -> int:
        return self.m // 2

    @property
    def integer_bits(self) -> int:
        return (self.m + 1) // 2

    @property
    def resolution(self) -> float:
        return 2.0 ** (-self.k)

    @property
    def magnitude_bits(self) -> int:
        return self.m - int(self.signed)

    @property
    def range_limit(self) -> float:
        """Exclusive upper limit on representable magnitudes."""
        return 2.0 ** (self.integer_bits - int(self.signed))

    @property
    def max_magnitude(self) -> float:
        return self.range_limit - self.resolution

    @property
    def error_bound(self) -> float:
        return 2.0 ** (-self.m / 2)

    @property
    def evolution_time(self) -> float:
        """QPE time ``t`` making ``lam * 2**k`` the integer read from the clock."""
        return 2.0 * math.pi / 2.0**self.integer_bits

    def prescale_limit(self, target: float | None = DEFAULT_PRESCALE_TARGET) -> float:
        """Spectral bound the prescaler aims for, never above ``max_magnitude``."""
        if target is None:
            return self.max_magnitude
        return min(float(target), self.max_magnitude)

    def value(self, mantissa: int) -> float:
        return mantissa * self.resolution
