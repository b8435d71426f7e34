"""Chebyshev polynomials of the first kind and compositions of them.

Three evaluators are provided:

* :func:`t_recurrence` -- the three-term value recurrence, linear in n.  This
  is what chains of small prime-indexed steps use.
* :func:`t_matrix` -- fast powering of the 2x2 companion matrix, O(log n)
  multiplications.  Kept as an oracle and benchmark path.
* :func:`t_analytic` -- cos(n * arccos(x)) with the working precision widened
  by the length of n, for big-integer degrees.

:func:`t_power_basis` additionally evaluates T_n from its exact integer
coefficients by Horner's rule.  It is numerically poor (the coefficients grow
like 2^n and cancel), which is precisely why it is here: it models software
that stores coefficient tables, and it is what makes low-precision composed
evaluations fall apart around degree 60.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from decimal import Decimal
from functools import lru_cache, reduce
from operator import mul

from .errors import DegenerateValueError, DomainError, PrecisionError
from .realfield import PrecisionCtx, arccos, cos, decimal_length, mod_two_pi

log = logging.getLogger(__name__)

MAX_RECURRENCE_DEGREE = 10**6
MAX_POWER_BASIS_DEGREE = 20_000
ANALYTIC_GUARD = 20
# working-digit ceiling for t_analytic; beyond this we refuse instead of guessing
ANALYTIC_DIGIT_CAP = 50_000

LOG10_2 = math.log10(2)


@dataclass(frozen=True)
class ChainSpec:
    """Ordered (index, count) steps; applying them composes T_index count times each."""

    steps: tuple[tuple[int, int], ...]

    def __post_init__(self):
        steps = tuple((int(i), int(c)) for i, c in self.steps)
        for index, count in steps:
            if index < 2:
                raise ValueError(f"chain index must be >= 2, got {index}")
            if count < 0:
                raise ValueError(f"chain count must be >= 0, got {count}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def of(cls, pairs) -> ChainSpec:
        return cls(tuple(pairs))

    @property
    def degree(self) -> int:
        return reduce(mul, (index**count for index, count in self.steps), 1)

    def canonical(self) -> tuple[tuple[int, int], ...]:
        """Steps in ascending index order, the evaluation order used everywhere."""
        return tuple(sorted(self.steps))

    def __repr__(self):
        return f"ChainSpec(<{len(self.steps)} steps>)"


def _check_unit_interval(x: Decimal, *, open_interval: bool = False):
    if open_interval and not (-1 < x < 1):
        raise DomainError(f"argument must lie in (-1, 1), got {x}")
    if not (-1 <= x <= 1):
        raise DomainError(f"argument must lie in [-1, 1], got {x}")


def t_recurrence(n: int, x: Decimal, ctx: PrecisionCtx) -> Decimal:
    """T_n(x) by T_k = 2x T_{k-1} - T_{k-2}; ``n`` up to 10^6."""
    if n < 0 or n > MAX_RECURRENCE_DEGREE:
        raise ValueError(f"recurrence degree must be in [0, {MAX_RECURRENCE_DEGREE}], got {n}")
    _check_unit_interval(x)
    if n == 0:
        return Decimal(1)
    with ctx.local():
        x = +x
        if n == 1:
            return x
        two_x = x + x
        prev, cur = Decimal(1), x
        for _ in range(n - 1):
            prev, cur = cur, two_x * cur - prev
    return cur


def t_matrix(n: int, x: Decimal, ctx: PrecisionCtx) -> Decimal:
    """T_n(x) as the first component of [[0, 1], [-1, 2x]]^n (1, x)."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    _check_unit_interval(x)
    if n == 0:
        return Decimal(1)
    with ctx.local():
        x = +x
        # row-major (a, b, c, d)
        result = (Decimal(1), Decimal(0), Decimal(0), Decimal(1))
        base = (Decimal(0), Decimal(1), Decimal(-1), x + x)
        k = n
        while k:
            if k & 1:
                result = _matmul(result, base)
            k >>= 1
            if k:
                base = _matmul(base, base)
        a, b, _, _ = result
        return a + b * x


def _matmul(m, n):
    a, b, c, d = m
    e, f, g, h = n
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def analytic_working_digits(n: int, ctx: PrecisionCtx) -> int:
    return ctx.digits + decimal_length(n) + ANALYTIC_GUARD


def t_analytic(n: int, x: Decimal, ctx: PrecisionCtx, *, digit_cap: int = ANALYTIC_DIGIT_CAP) -> Decimal:
    """T_n(x) = cos(n * arccos(x)) for arbitrarily large integer ``n``.

    ``x`` is taken as exact.  The phase n*arccos(x) is formed and reduced
    modulo 2pi at ``ctx.digits + len(n) + 20`` digits, so the rounding of the
    phase never eats into the returned digits.  The result is then correctly
    rounded with respect to the given ``x``; relative to an ``x`` that is
    itself only known to ``ctx.digits``, about ``log10(n)`` digits are lost
    (see :func:`error_budget`).
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    if n == 0:
        return Decimal(1)
    if n == 1:
        return ctx.round(x)
    _check_unit_interval(x, open_interval=True)
    work_digits = analytic_working_digits(n, ctx)
    if work_digits > digit_cap:
        raise PrecisionError(f"t_analytic would need {work_digits} working digits (cap {digit_cap})")
    work = PrecisionCtx(work_digits)
    theta = arccos(x, work)
    with work.local():
        phase = Decimal(n) * theta
    reduced = mod_two_pi(phase, work, guard_digits=decimal_length(n) + 1)
    return ctx.round(cos(reduced, work))


@lru_cache(maxsize=64)
def power_basis_coefficients(n: int) -> tuple[int, ...]:
    """Exact integer coefficients of T_n, index k holding the x^k coefficient."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    coeffs = [0] * (n + 1)
    if n == 0:
        coeffs[0] = 1
        return tuple(coeffs)
    # c_{n-2k} = (-1)^k * n / (n-k) * C(n-k, k) * 2^(n-2k-1)
    for k in range(n // 2 + 1):
        power = n - 2 * k
        magnitude = n * math.comb(n - k, k) * 2**power // (2 * (n - k))
        coeffs[power] = -magnitude if k % 2 else magnitude
    return tuple(coeffs)


def t_power_basis(n: int, x: Decimal, ctx: PrecisionCtx) -> Decimal:
    """Horner evaluation of the stored integer coefficients of T_n at ``ctx``.

    Each coefficient is first rounded to ``ctx.digits``, as a fixed-precision
    coefficient table would be.
    """
    if n > MAX_POWER_BASIS_DEGREE:
        raise ValueError(f"power-basis degree capped at {MAX_POWER_BASIS_DEGREE}")
    coeffs = power_basis_coefficients(n)
    dctx = ctx.context
    with ctx.local():
        x = +x
        acc = Decimal(0)
        for c in reversed(coeffs):
            acc = acc * x + dctx.create_decimal(c)
    return acc


def is_degenerate(v: Decimal, ctx: PrecisionCtx) -> bool:
    """True when ``v`` is within 10^-(digits/2) of -1, 0 or 1."""
    threshold = Decimal(1).scaleb(-(ctx.digits // 2))
    mag = v.copy_abs()
    with ctx.local():
        return mag < threshold or abs(mag - 1) < threshold


def compose_chain(chain: ChainSpec, x: Decimal, ctx: PrecisionCtx) -> Decimal:
    """Apply each step of ``chain`` in ascending index order by value recurrence.

    Raises :class:`DegenerateValueError` as soon as an intermediate value comes
    within 10^-(digits/2) of -1, 0 or 1; the caller is expected to pick a new x.
    """
    _check_unit_interval(x, open_interval=True)
    value = ctx.round(x)
    for index, count in chain.canonical():
        for _ in range(count):
            value = t_recurrence(index, value, ctx)
            if is_degenerate(value, ctx):
                raise DegenerateValueError(f"chain hit a degenerate value after T_{index}")
    return value


def clamp_unit(v: Decimal) -> Decimal:
    """Clamp a value that rounding pushed just outside [-1, 1]; logs the overshoot."""
    if v > 1:
        log.debug("clamped value above 1 by %s", v - 1)
        return Decimal(1)
    if v < -1:
        log.debug("clamped value below -1 by %s", -1 - v)
        return Decimal(-1)
    return v


def error_budget(degree: int, evaluator: str = "recurrence") -> int:
    """Estimated number of leading digits lost evaluating a degree-``degree`` map.

    ``recurrence`` and ``analytic`` lose about log10(degree) digits plus a small
    constant (error amplification by the derivative of T_n).  ``power``
    follows the stored-coefficient model: one bit per degree, i.e. one decimal
    digit per ~3.3 degrees.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if evaluator == "power":
        return math.ceil(degree * LOG10_2)
    if evaluator in ("recurrence", "analytic"):
        return math.ceil(math.log10(degree)) + 3
    raise ValueError(f"unknown evaluator {evaluator!r}")


EVALUATORS = {
    "recurrence": t_recurrence,
    "matrix": t_matrix,
    "analytic": t_analytic,
    "power": t_power_basis,
}
