"""Arbitrary-precision reals measured in decimal digits.

Values are plain :class:`decimal.Decimal` instances (immutable, exact
decimal significand and exponent).  A :class:`PrecisionCtx` fixes the number
of significant decimal digits and the rounding mode (round half to even).

Trigonometric functions delegate the series work to a thread-private
:mod:`mpmath` context evaluated with guard digits, and round the result back
into the decimal context.  Every cos/arccos/mod-2pi computation in the
package goes through this module so that the guard-digit policy lives in one
place.
"""

from __future__ import annotations

import decimal
import logging
import math
import re
import threading
from dataclasses import dataclass
from decimal import Decimal
from functools import lru_cache

import mpmath
from mpmath import libmp

from .errors import DomainError, ParseError, PrecisionError

__all__ = [
    "Real",
    "PrecisionCtx",
    "MIN_DIGITS",
    "from_decimal",
    "to_decimal",
    "parse_canonical",
    "is_canonical",
    "significant_digits",
    "decimal_length",
    "agreement_digits",
    "pi",
    "two_pi",
    "arccos",
    "cos",
    "mod_two_pi",
]

log = logging.getLogger(__name__)

Real = Decimal

MIN_DIGITS = 16
TRIG_GUARD = 10

_EMAX = decimal.MAX_EMAX
_EMIN = decimal.MIN_EMIN
_TRAPS = [decimal.InvalidOperation, decimal.DivisionByZero, decimal.Overflow]

_INPUT_RE = re.compile(r"[+-]?[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")
_CANONICAL_RE = re.compile(r"0e0|-?[1-9](?:\.[0-9]+)?e(?:0|-?[1-9][0-9]*)")


@lru_cache(maxsize=None)
def _template(digits: int) -> decimal.Context:
    return decimal.Context(
        prec=digits,
        rounding=decimal.ROUND_HALF_EVEN,
        Emax=_EMAX,
        Emin=_EMIN,
        traps=_TRAPS,
    )


@dataclass(frozen=True)
class PrecisionCtx:
    """Number of significant decimal digits carried by every operation."""

    digits: int

    def __post_init__(self):
        if not isinstance(self.digits, int) or self.digits < MIN_DIGITS:
            raise ValueError(f"precision must be an integer >= {MIN_DIGITS}, got {self.digits!r}")

    @property
    def context(self) -> decimal.Context:
        # copies: decimal contexts carry mutable flags
        return _template(self.digits).copy()

    def local(self):
        """Context manager making this precision the active decimal context."""
        return decimal.localcontext(_template(self.digits))

    def widen(self, extra: int) -> PrecisionCtx:
        return PrecisionCtx(self.digits + extra)

    def round(self, value) -> Decimal:
        """Round ``value`` (Decimal or int) to this precision."""
        return self.context.create_decimal(value)

    @property
    def ulp_scale(self) -> Decimal:
        """10^(1 - digits), the relative error bound of one rounded operation."""
        return Decimal(1).scaleb(1 - self.digits)


def from_decimal(s: str, ctx: PrecisionCtx) -> Decimal:
    """Parse ``s`` and round it to ``ctx.digits`` significant digits."""
    if not isinstance(s, str) or not _INPUT_RE.fullmatch(s):
        raise ParseError(f"malformed decimal string: {s!r}")
    return ctx.round(s)


def _round_sig(v: Decimal, digits: int) -> Decimal:
    return _template(digits).copy().plus(v)


def to_decimal(v: Decimal, max_digits: int) -> str:
    """Canonical form ``[-]D[.D+]e[-]D+`` with exactly ``max_digits`` significant digits.

    >>> to_decimal(Decimal("0.5"), 3)
    '5.00e-1'
    >>> to_decimal(Decimal(-1), 1)
    '-1e0'
    """
    if max_digits < 1:
        raise ValueError("max_digits must be >= 1")
    if v.is_zero():
        return "0e0"
    q = _round_sig(v, max_digits)
    sign, digits, _ = q.as_tuple()
    body = "".join(map(str, digits)).ljust(max_digits, "0")
    mant = body[0] + ("." + body[1:] if len(body) > 1 else "")
    return f"{'-' if sign else ''}{mant}e{q.adjusted()}"


def is_canonical(s: str) -> bool:
    return isinstance(s, str) and _CANONICAL_RE.fullmatch(s) is not None


def parse_canonical(s: str) -> Decimal:
    """Exact parse of a canonical-grammar string (no rounding)."""
    if not is_canonical(s):
        raise ParseError(f"non-canonical number: {s!r}")
    return Decimal(s)


def significant_digits(v: Decimal, n: int) -> str:
    """The first ``n`` significant decimal digits of ``|v|`` (rounded, zero-padded)."""
    if v.is_zero():
        return "0" * n
    text = to_decimal(v.copy_abs(), n)
    return text.split("e")[0].replace(".", "")


def decimal_length(n: int) -> int:
    """Number of decimal digits of ``|n|`` (0 has length 1)."""
    if n == 0:
        return 1
    return Decimal(abs(n)).adjusted() + 1


def agreement_digits(a: Decimal, b: Decimal, cap: int = 10_000) -> int:
    """Leading significant digits on which ``a`` and ``b`` agree.

    Measured as ``floor(-log10(|a - b| / max(|a|, |b|)))``, clipped to
    ``[0, cap]``; identical values return ``cap``.
    """
    if a == b:
        return cap
    scale = max(a.copy_abs(), b.copy_abs())
    with decimal.localcontext(_template(60)):
        rel = abs(a - b) / scale
        if rel >= 1:
            return 0
        value = -rel.log10()
    return max(0, min(cap, int(value.to_integral_value(rounding=decimal.ROUND_FLOOR))))


# --- mpmath bridge -----------------------------------------------------------

_mp_local = threading.local()


def _mp(dps: int) -> mpmath.MPContext:
    mp = getattr(_mp_local, "ctx", None)
    if mp is None:
        mp = _mp_local.ctx = mpmath.MPContext()
    mp.dps = dps
    return mp


def _to_mpf(mp, v: Decimal):
    return mp.mpf(str(v))


def _from_mpf(v, digits: int) -> Decimal:
    return Decimal(libmp.to_str(v._mpf_, digits))


_pi_lock = threading.Lock()
_pi_cache: dict[int, Decimal] = {}


def pi(ctx: PrecisionCtx) -> Decimal:
    """pi rounded to ``ctx.digits`` digits, computed once per precision."""
    value = _pi_cache.get(ctx.digits)
    if value is None:
        with _pi_lock:
            value = _pi_cache.get(ctx.digits)
            if value is None:
                mp = _mp(ctx.digits + TRIG_GUARD)
                value = ctx.round(_from_mpf(mp.pi, ctx.digits + TRIG_GUARD))
                _pi_cache[ctx.digits] = value
    return value


def two_pi(ctx: PrecisionCtx) -> Decimal:
    # 2*pi is computed from the cached pi one digit wider so the doubling stays exact
    with ctx.local():
        return +(2 * pi(ctx.widen(1)))


def arccos(v: Decimal, ctx: PrecisionCtx) -> Decimal:
    """Principal arccos in [0, pi], correctly rounded up to one guard-digit slip."""
    if v.copy_abs() > 1:
        raise DomainError(f"arccos argument outside [-1, 1]: {v}")
    if v == 1:
        return Decimal(0)
    if v == -1:
        return pi(ctx)
    # near |v| = 1 the result depends on 1 - |v|, so keep those digits too
    exact = _template(max(ctx.digits, len(v.as_tuple().digits)) + 5).copy()
    gap = exact.subtract(1, v.copy_abs()).adjusted()
    extra = max(0, -gap)
    work = ctx.digits + TRIG_GUARD + extra + max(0, len(v.as_tuple().digits) - ctx.digits)
    mp = _mp(work)
    return ctx.round(_from_mpf(mp.acos(_to_mpf(mp, v)), ctx.digits + TRIG_GUARD))


def mod_two_pi(v: Decimal, ctx: PrecisionCtx, guard_digits: int) -> Decimal:
    """Reduce ``v`` into [0, 2*pi) using ``ctx.digits + guard_digits`` working digits.

    ``v`` is taken as exact.  Raises :class:`PrecisionError` when the integer
    quotient ``v / 2pi`` has more digits than ``guard_digits`` can absorb.
    """
    if v.is_zero():
        return Decimal(0)
    quotient = _template(20).copy().divide(v.copy_abs(), Decimal("6.283185307179586"))
    quotient_digits = quotient.adjusted() + 1 if quotient >= 1 else 0
    if guard_digits < quotient_digits:
        raise PrecisionError(
            f"mod 2pi needs >= {quotient_digits} guard digits, got {guard_digits}"
        )
    work = PrecisionCtx(ctx.digits + guard_digits)
    period = two_pi(work)
    with work.local():
        q = (v / period).to_integral_value(rounding=decimal.ROUND_FLOOR)
        r = v - q * period
        if r < 0:
            r += period
        elif r >= period:
            r -= period
    return ctx.round(r)


def cos(v: Decimal, ctx: PrecisionCtx) -> Decimal:
    """cos(v) for any finite ``v``; the argument is reduced modulo 2pi first."""
    work = ctx.widen(TRIG_GUARD)
    guard = max(0, v.adjusted() + 2)
    reduced = mod_two_pi(v, work, guard) if v.copy_abs() >= 7 else v
    mp = _mp(work.digits + TRIG_GUARD)
    result = ctx.round(_from_mpf(mp.cos(_to_mpf(mp, reduced)), work.digits))
    if result > 1:
        return Decimal(1)
    if result < -1:
        return Decimal(-1)
    return result


def log10_abs(v) -> float:
    """log10|v| as a float for Decimals and (arbitrarily large) ints."""
    if isinstance(v, int):
        return math.log10(abs(v))
    return float(v.copy_abs().log10(_template(30).copy()))
