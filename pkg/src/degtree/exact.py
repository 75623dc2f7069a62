"""Exact integer/rational kernel plus a log-domain weight for large n.

Every closed-form probability in the package is an ``ExactQ`` (a
:class:`fractions.Fraction`).  ``LogWeight`` is the float fallback used when
the exact big integers get too slow; see :data:`EXACT_MAX_N`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError

ExactQ = Fraction

#: Formula evaluators return ``ExactQ`` for n up to this value and
#: ``LogWeight`` above it, unless told otherwise.
EXACT_MAX_N = 512


def use_exact(n: int, exact: bool | None) -> bool:
    if exact is None:
        return n <= EXACT_MAX_N
    return exact


def binomial(a: int, b: int) -> int:
    """C(a, b) for a >= 0; zero outside ``0 <= b <= a``."""
    if a < 0:
        raise DomainError(f"binomial: upper index must be >= 0, got {a}")
    if b < 0 or b > a:
        return 0
    return math.comb(a, b)


def rising_product(lo: int, hi: int) -> int:
    """lo * (lo+1) * ... * hi, with the empty range ``hi == lo - 1`` giving 1."""
    if lo < 1 or hi < lo - 1:
        raise DomainError(f"rising_product: need lo >= 1 and hi >= lo - 1, got ({lo}, {hi})")
    return math.prod(range(lo, hi + 1))


def factorial_ratio(a: int, b: int) -> Fraction:
    """a! / b! computed as a short product; cheap when |a - b| is small."""
    if a < 0 or b < 0:
        raise DomainError("factorial_ratio: arguments must be >= 0")
    if a >= b:
        return Fraction(math.prod(range(b + 1, a + 1)))
    return Fraction(1, math.prod(range(a + 1, b + 1)))


def binomial_ratio(a1: int, b1: int, a2: int, b2: int) -> Fraction:
    """C(a1, b1) / C(a2, b2) without forming either binomial.

    Returns 0 when the numerator binomial vanishes (negative lower index,
    lower index above the upper one).  The denominator must be nonzero.
    """
    if a2 < 0 or b2 < 0 or b2 > a2:
        raise DomainError("binomial_ratio: denominator binomial is zero")
    if a1 < 0 or b1 < 0 or b1 > a1:
        return Fraction(0)
    return factorial_ratio(a1, a2) * factorial_ratio(b2, b1) * factorial_ratio(a2 - b2, a1 - b1)


def composition_product_sum(parts: int, total: int) -> int:
    """Sum of d_1*...*d_parts over compositions of ``total`` into positive parts.

    Closed form C(parts + total - 1, total - parts); zero parts sum to the
    empty product only when ``total == 0``.
    """
    if parts < 0:
        raise DomainError("parts must be >= 0")
    if parts == 0:
        return 1 if total == 0 else 0
    if total < parts:
        return 0
    return math.comb(parts + total - 1, total - parts)


def format_q(q: Fraction) -> str:
    """Serialize as ``"p/q"`` (always with a denominator)."""
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_q(text: str) -> Fraction:
    return Fraction(text)


# ---------------------------------------------------------------------------
# log domain


def log_factorial(a: int) -> float:
    return math.lgamma(a + 1)


def log_binomial(a: int, b: int) -> float:
    """log C(a, b); ``-inf`` where the binomial is zero."""
    if a < 0:
        raise DomainError(f"log_binomial: upper index must be >= 0, got {a}")
    if b < 0 or b > a:
        return -math.inf
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


@dataclass(frozen=True)
class LogWeight:
    """A nonnegative real stored as its natural log (``zero`` marks exact 0)."""

    log: float = 0.0
    zero: bool = False

    @classmethod
    def of(cls, value) -> LogWeight:
        if isinstance(value, LogWeight):
            return value
        if value < 0:
            raise DomainError("LogWeight represents nonnegative reals only")
        if value == 0:
            return cls(0.0, True)
        if isinstance(value, Fraction):
            return cls(_log_int(value.numerator) - _log_int(value.denominator))
        if isinstance(value, int):
            return cls(_log_int(value))
        return cls(math.log(value))

    @classmethod
    def from_log(cls, log_value: float) -> LogWeight:
        if log_value == -math.inf:
            return cls(0.0, True)
        return cls(log_value)

    def __mul__(self, other) -> LogWeight:
        other = LogWeight.of(other)
        if self.zero or other.zero:
            return LogWeight(0.0, True)
        return LogWeight(self.log + other.log)

    __rmul__ = __mul__

    def __truediv__(self, other) -> LogWeight:
        other = LogWeight.of(other)
        if other.zero:
            raise ZeroDivisionError("division by a zero LogWeight")
        if self.zero:
            return self
        return LogWeight(self.log - other.log)

    def __pow__(self, k: int) -> LogWeight:
        if self.zero:
            return LogWeight(0.0, k != 0) if k >= 0 else _raise_zero_div()
        return LogWeight(self.log * k)

    def __float__(self) -> float:
        return 0.0 if self.zero else math.exp(self.log)

    def rel_diff(self, exact: Fraction) -> float:
        """Relative difference against an exact value (0 when both vanish)."""
        if exact == 0:
            return 0.0 if self.zero else math.inf
        if self.zero:
            return 1.0
        other = LogWeight.of(Fraction(exact))
        return abs(math.expm1(self.log - other.log))


def _raise_zero_div():
    raise ZeroDivisionError("zero LogWeight to a negative power")


def _log_int(v: int) -> float:
    # math.log accepts arbitrarily large ints
    return math.log(v)
