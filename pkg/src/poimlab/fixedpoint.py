"""Fixed-point integer arithmetic with EVM truncating semantics.

Values are stored as ``raw = trunc(v * S)`` with ``S = 10**exponent``.
Division always truncates toward zero (SDIV), stored raws must fit a signed
128-bit word and intermediate products a signed 256-bit word.  Overflow is
an error, never a wrap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from numbers import Rational
from typing import Union

from .errors import DivisionByZero, FixedPointOverflow, ScaleError

INT128_BOUND = 1 << 127
INT256_BOUND = 1 << 255
MIN_EXPONENT = 1
MAX_EXPONENT = 18

Real = Union[int, float, Decimal, Fraction, str]


@dataclass(frozen=True, order=True)
class Scale:
    exponent: int

    def __post_init__(self):
        if isinstance(self.exponent, bool) or not isinstance(self.exponent, int):
            raise ScaleError(f"scale exponent must be an integer, got {self.exponent!r}")
        if not MIN_EXPONENT <= self.exponent <= MAX_EXPONENT:
            raise ScaleError(
                f"scale exponent {self.exponent} outside [{MIN_EXPONENT}, {MAX_EXPONENT}]"
            )

    @property
    def value(self) -> int:
        return 10 ** self.exponent

    @classmethod
    def from_value(cls, value: int) -> "Scale":
        """Build a Scale from ``10**k`` itself (e.g. ``10**12``)."""
        if value < 10:
            raise ScaleError(f"scale {value} is not a power of ten in [10, 10**18]")
        exp = len(str(value)) - 1
        if 10 ** exp != value:
            raise ScaleError(f"scale {value} is not a power of ten")
        return cls(exp)

    def __int__(self) -> int:
        return self.value


def scale_value(scale: Union[Scale, int]) -> int:
    return scale.value if isinstance(scale, Scale) else int(scale)


@dataclass(frozen=True)
class ScaledInt:
    raw: int
    scale: Scale

    def __post_init__(self):
        check_int128(self.raw)

    def __add__(self, other: "ScaledInt") -> "ScaledInt":
        _same_scale(self, other)
        return ScaledInt(self.raw + other.raw, self.scale)

    def __sub__(self, other: "ScaledInt") -> "ScaledInt":
        _same_scale(self, other)
        return ScaledInt(self.raw - other.raw, self.scale)

    def __neg__(self) -> "ScaledInt":
        return ScaledInt(-self.raw, self.scale)

    def __mul__(self, other: "ScaledInt") -> "ScaledInt":
        _same_scale(self, other)
        return ScaledInt(mul_div(self.raw, other.raw, self.scale), self.scale)

    def __float__(self) -> float:
        return from_fixed(self)


def _same_scale(a: ScaledInt, b: ScaledInt) -> None:
    if a.scale != b.scale:
        raise ValueError(f"scale mismatch: 10^{a.scale.exponent} vs 10^{b.scale.exponent}")


def check_int128(raw: int) -> int:
    if not -INT128_BOUND < raw < INT128_BOUND:
        raise FixedPointOverflow(f"value {raw} outside the signed 128-bit range")
    return raw


def check_int256(value: int) -> int:
    if not -INT256_BOUND <= value < INT256_BOUND:
        raise FixedPointOverflow(f"intermediate {value} outside the signed 256-bit range")
    return value


def exact(v: Real) -> Fraction:
    """Exact rational value of ``v``.

    Floats are read through their shortest round-trip decimal form, so
    ``-0.15`` means -15/100 rather than the nearest binary double.
    """
    if isinstance(v, bool):
        return Fraction(int(v))
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"cannot convert non-finite value {v!r} to fixed point")
        return Fraction(Decimal(repr(v)))
    if isinstance(v, Decimal):
        if not v.is_finite():
            raise ValueError(f"cannot convert non-finite value {v!r} to fixed point")
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(Decimal(v))
    return exact(float(v))


def to_fixed_raw(v: Real, scale: Union[Scale, int]) -> int:
    raw = math.trunc(exact(v) * scale_value(scale))
    return check_int128(raw)


def to_fixed(v: Real, scale: Scale) -> ScaledInt:
    """Convert ``v`` to fixed point, truncating toward zero."""
    return ScaledInt(to_fixed_raw(v, scale), scale)


def from_fixed(x: Union[ScaledInt, int], scale: Union[Scale, int, None] = None) -> float:
    """``raw / S`` rounded to the nearest double."""
    if isinstance(x, ScaledInt):
        return x.raw / x.scale.value
    if scale is None:
        raise TypeError("a scale is required when passing a bare raw integer")
    return x / scale_value(scale)


def idiv(a: int, b: int) -> int:
    """Signed integer division truncating toward zero (EVM SDIV)."""
    if b == 0:
        raise DivisionByZero("idiv by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def mul_div(a: int, b: int, scale: Union[Scale, int]) -> int:
    return idiv(check_int256(a * b), scale_value(scale))


def mac(acc: int, w: int, x: int, scale: Union[Scale, int]) -> int:
    """One multiply-accumulate step: ``acc + idiv(w * x, S)``."""
    return check_int256(acc + mul_div(w, x, scale))
