import decimal
from decimal import Decimal

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chebkex.errors import DomainError, ParseError, PrecisionError
from chebkex.realfield import (
    PrecisionCtx,
    agreement_digits,
    arccos,
    cos,
    decimal_length,
    from_decimal,
    is_canonical,
    mod_two_pi,
    parse_canonical,
    pi,
    significant_digits,
    to_decimal,
    two_pi,
)

PI_100 = (
    "3.141592653589793238462643383279502884197169399375105820974944592307816406286"
    "208998628034825342117068"
)

# frozen from mpmath at 120 digits
ACOS_03 = "1.26610367277949911125931873041222227514402466798077652309449"
COS_12345_678 = "0.710119358716144739501448923334245684269483504338086364782254"
COS_1E30 = "-0.9959311944053957023942485879970486411302"


def test_precision_floor():
    with pytest.raises(ValueError):
        PrecisionCtx(15)
    assert PrecisionCtx(16).digits == 16


def test_round_half_even():
    ctx = PrecisionCtx(16)
    assert ctx.round(Decimal("1.0000000000000005")) == Decimal("1.000000000000000")
    assert ctx.round(Decimal("1.0000000000000015")) == Decimal("1.000000000000002")


def test_to_decimal_examples():
    assert to_decimal(Decimal("0.5"), 3) == "5.00e-1"
    assert to_decimal(Decimal(-1), 1) == "-1e0"
    assert to_decimal(Decimal(0), 20) == "0e0"
    assert to_decimal(Decimal("123.456"), 4) == "1.235e2"


@pytest.mark.parametrize("bad", ["", "abc", "1.", ".5", "1e", "--1", "1.0.0", " 1", "nan", "inf"])
def test_from_decimal_rejects(bad):
    with pytest.raises(ParseError):
        from_decimal(bad, PrecisionCtx(20))


def test_from_decimal_rounds():
    ctx = PrecisionCtx(16)
    assert from_decimal("0.12345678901234567890", ctx) == Decimal("0.1234567890123457")


@pytest.mark.parametrize("text", ["0.50", "5e-1", "5.0E-1", "+5.0e-1", "05.0e-1", "5.0e-01", "-0e0", "5.0e+1"])
def test_non_canonical(text):
    # "5e-1" is canonical, the rest are not
    assert is_canonical(text) == (text == "5e-1")


def test_parse_canonical_rejects_plain_decimal():
    with pytest.raises(ParseError):
        parse_canonical("0.50")


@given(
    st.decimals(allow_nan=False, allow_infinity=False, min_value=-10**6, max_value=10**6, places=30),
    st.integers(16, 80),
)
def test_canonical_round_trip(value, digits):
    ctx = PrecisionCtx(digits)
    v = ctx.round(value)
    text = to_decimal(v, digits)
    assert is_canonical(text)
    assert parse_canonical(text) == v


@given(st.integers(16, 120))
def test_fixed_width(digits):
    ctx = PrecisionCtx(digits)
    with ctx.local():
        a = Decimal(1) / 3
    b = Decimal("0.5")
    mant = lambda s: s.split("e")[0].replace(".", "").replace("-", "")  # noqa: E731
    assert len(mant(to_decimal(a, digits))) == len(mant(to_decimal(b, digits))) == digits


def test_significant_digits_uses_full_value():
    # regression: abs() under the default 28-digit context truncated the expansion
    ctx = PrecisionCtx(60)
    with ctx.local():
        v = -Decimal(1) / 7
    assert significant_digits(v, 60) == ("142857" * 10)


def test_decimal_length():
    assert [decimal_length(n) for n in (0, 9, 10, 10**40, -99)] == [1, 1, 2, 41, 2]


def test_agreement_digits():
    assert agreement_digits(Decimal("0.123456"), Decimal("0.123457")) == 5
    assert agreement_digits(Decimal("0.5"), Decimal("0.5"), cap=40) == 40
    assert agreement_digits(Decimal("0.5"), Decimal("-0.5")) == 0


def test_pi():
    assert str(pi(PrecisionCtx(100))) == PI_100[:101]
    ctx = PrecisionCtx(30)
    assert two_pi(ctx) == ctx.context.multiply(2, Decimal(PI_100))


def test_arccos_examples():
    ctx = PrecisionCtx(60)
    assert arccos(Decimal(1), ctx) == 0
    assert arccos(Decimal(-1), ctx) == pi(ctx)
    assert arccos(Decimal("0.3"), ctx) == Decimal(ACOS_03)
    with pytest.raises(DomainError):
        arccos(Decimal("1.5"), ctx)


def test_arccos_near_one():
    ctx = PrecisionCtx(40)
    v = Decimal(1) - Decimal(1).scaleb(-50)
    mp = mpmath.mp.clone()
    mp.dps = 120
    oracle = Decimal(mpmath.nstr(mp.acos(mp.mpf(str(v))), 60, strip_zeros=False))
    assert agreement_digits(arccos(v, ctx), oracle) >= 39


def test_cos_examples():
    ctx = PrecisionCtx(60)
    assert cos(Decimal("12345.678"), ctx) == Decimal(COS_12345_678)
    assert agreement_digits(cos(Decimal(10) ** 30, PrecisionCtx(40)), Decimal(COS_1E30)) >= 39


def test_mod_two_pi_large_multiple():
    ctx = PrecisionCtx(50)
    wide = PrecisionCtx(100)
    with wide.local():
        v = Decimal(10**6) * two_pi(wide) + 1
    r = mod_two_pi(v, ctx, guard_digits=7)
    assert abs(r - 1) <= Decimal(1).scaleb(2 - ctx.digits)


def test_mod_two_pi_guard_check():
    with pytest.raises(PrecisionError):
        mod_two_pi(Decimal(10) ** 20, PrecisionCtx(30), guard_digits=5)


@given(st.decimals(min_value=-50, max_value=50, allow_nan=False, places=20))
def test_mod_two_pi_range(v):
    ctx = PrecisionCtx(30)
    r = mod_two_pi(v, ctx, guard_digits=5)
    assert 0 <= r < two_pi(ctx)


@given(st.decimals(min_value=-1, max_value=1, allow_nan=False, places=25))
def test_cos_arccos_inverse(v):
    ctx = PrecisionCtx(40)
    back = cos(arccos(v, ctx), ctx)
    assert abs(back - v) <= Decimal(1).scaleb(-37)


def test_context_isolation():
    # the caller's context is untouched
    decimal.getcontext().prec = 28
    cos(Decimal("0.5"), PrecisionCtx(200))
    assert decimal.getcontext().prec == 28
