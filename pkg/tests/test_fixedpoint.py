from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from oracles import sdiv
from poimlab.errors import DivisionByZero, FixedPointOverflow, ScaleError
from poimlab.fixedpoint import (
    INT128_BOUND,
    Scale,
    ScaledInt,
    check_int256,
    from_fixed,
    idiv,
    mac,
    mul_div,
    to_fixed,
    to_fixed_raw,
)


def test_scale_bounds():
    assert Scale(1).value == 10
    assert Scale(18).value == 10 ** 18
    for bad in (0, 19, -1):
        with pytest.raises(ScaleError):
            Scale(bad)
    with pytest.raises(ScaleError):
        Scale(True)


def test_scale_from_value():
    assert Scale.from_value(10 ** 12) == Scale(12)
    for bad in (1, 5, 20, 10 ** 19, 999):
        with pytest.raises(ScaleError):
            Scale.from_value(bad)


@pytest.mark.parametrize("v,S,raw", [
    (0.5, 100, 50),
    (-0.15, 100, -15),
    (1.999, 10, 19),
    (-1.999, 10, -19),
    (0.0, 10 ** 18, 0),
    (3, 1000, 3000),
])
def test_to_fixed_examples(v, S, raw):
    assert to_fixed_raw(v, S) == raw


def test_to_fixed_truncates_toward_zero_not_floor():
    assert to_fixed_raw(-0.01, 10) == 0
    assert to_fixed_raw(Fraction(-7, 3), 10) == -23


def test_to_fixed_rejects_non_finite():
    for v in (float("inf"), float("-inf"), float("nan")):
        with pytest.raises(ValueError):
            to_fixed_raw(v, 10)


def test_to_fixed_overflow():
    with pytest.raises(FixedPointOverflow):
        to_fixed_raw(2.0 ** 70, 10 ** 18)
    assert to_fixed_raw(Fraction(INT128_BOUND - 1, 10), 10) == INT128_BOUND - 1
    with pytest.raises(FixedPointOverflow):
        to_fixed_raw(Fraction(INT128_BOUND, 10), 10)


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6),
       st.integers(1, 18))
def test_to_fixed_matches_decimal_oracle(v, e):
    expected = int(Decimal(repr(v)) * (Decimal(10) ** e))  # int() truncates toward zero
    assert to_fixed(v, Scale(e)).raw == expected


@given(st.integers(-10 ** 12, 10 ** 12), st.integers(1, 12))
def test_from_fixed_round_trip_on_representable(raw, e):
    S = 10 ** e
    assert to_fixed_raw(from_fixed(raw, S), S) in (raw, raw - 1, raw + 1)
    assert to_fixed_raw(Fraction(raw, S), S) == raw


def test_idiv_exhaustive_small_range():
    for a in range(-1000, 1001):
        for b in (-7, -3, -2, -1, 1, 2, 3, 7, 10, 999):
            assert idiv(a, b) == sdiv(a, b)


def test_idiv_examples():
    assert idiv(-7, 2) == -3
    assert idiv(7, -2) == -3
    assert idiv(-7, -2) == 3
    with pytest.raises(DivisionByZero):
        idiv(1, 0)
    with pytest.raises(ZeroDivisionError):
        idiv(1, 0)


@given(st.integers(-2 ** 200, 2 ** 200), st.integers(-2 ** 60, 2 ** 60).filter(bool))
def test_idiv_property(a, b):
    q = idiv(a, b)
    assert q == sdiv(a, b)
    r = a - q * b
    assert abs(r) < abs(b)
    assert r == 0 or (r > 0) == (a > 0)


def test_mac_and_mul_div():
    assert mul_div(15, 25, 10) == 37
    assert mul_div(-15, 25, 10) == -37
    assert mac(100, -15, 25, 10) == 63


def test_intermediate_overflow():
    with pytest.raises(FixedPointOverflow):
        check_int256(2 ** 255)
    assert check_int256(-(2 ** 255)) == -(2 ** 255)
    with pytest.raises(FixedPointOverflow):
        mul_div(2 ** 200, 2 ** 60, 10)


def test_scaled_int_arithmetic():
    s = Scale(2)
    a, b = to_fixed(1.5, s), to_fixed(-0.25, s)
    assert (a + b).raw == 125
    assert (a - b).raw == 175
    assert (-a).raw == -150
    assert (a * b).raw == -37
    assert float(a) == 1.5
    with pytest.raises(ValueError):
        a + to_fixed(1.0, Scale(3))


def test_scaled_int_storage_bound():
    with pytest.raises(FixedPointOverflow):
        ScaledInt(INT128_BOUND, Scale(1))
    ScaledInt(INT128_BOUND - 1, Scale(1))
