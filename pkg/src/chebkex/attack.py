"""Cryptanalysis at desk scale: arccos-ratio recovery, the diophantine sieve,
combination brute force, and the double-precision divergence demo.

For y = T_n(x) with theta = arccos(x), every integer a with
cos(a * theta) = y has the form a = +-d + e*k where d = arccos(y)/theta and
e = 2pi/theta.  The sieve multiplies by a modulus M and rounds, turning
"+-d + e*k is an integer" into k*[e*M] = -[+-d*M] (mod M), a linear
congruence.  Rounding makes that congruence hold only up to a residual eps
of order k/2, so the attacker also has to enumerate eps; ``search_width``
bounds that enumeration.  Once k (equivalently n) is large, neither the
residual nor M can be chosen to pin it down, which is what these runs show.
They demonstrate the point empirically; they do not prove anything.
"""

from __future__ import annotations

import csv
import decimal
import itertools
import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal

from .chebyshev import EVALUATORS, clamp_unit, compose_chain, t_analytic
from .errors import DegenerateValueError, DomainError, ParameterError, PrecisionError
from .realfield import PrecisionCtx, agreement_digits, arccos, decimal_length, log10_abs, significant_digits, two_pi
from .strategy import Combination, FunctionSet, chain_of, combination_count, exponent_of

log = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 2**24
VERIFY_SLACK = 5
CSV_COLUMNS = ("M", "candidate", "agreement_digits", "verified", "work")


@dataclass(frozen=True)
class SieveInstance:
    x: Decimal
    y: Decimal
    M: int
    d: Decimal
    e: Decimal


@dataclass
class AttackResult:
    candidates: list[int] = field(default_factory=list)
    verified: list[int] = field(default_factory=list)
    work: int = 0
    rows: list[tuple] = field(default_factory=list)
    best_candidate: int | None = None
    best_agreement: int = -1

    @property
    def success(self) -> bool:
        return bool(self.verified)

    def note(self, M, candidate: int, agreement: int, verified: bool):
        self.work += 1
        self.candidates.append(candidate)
        self.rows.append((M, candidate, agreement, verified, self.work))
        if verified and candidate not in self.verified:
            self.verified.append(candidate)
        if agreement > self.best_agreement:
            self.best_candidate, self.best_agreement = candidate, agreement


def _theta(x: Decimal, ctx: PrecisionCtx) -> Decimal:
    if not (-1 < x < 1):
        raise DomainError("x must lie in (-1, 1)")
    theta = arccos(x, ctx)
    if theta < ctx.ulp_scale.sqrt():
        raise DegenerateValueError("arccos(x) is too close to zero")
    return theta


def arccos_ratio(y: Decimal, x: Decimal, ctx: PrecisionCtx) -> Decimal:
    """a(x) = arccos(y) / arccos(x) on the principal branch."""
    theta = _theta(x, ctx)
    with ctx.local():
        return arccos(y, ctx) / theta


def sieve_params(y: Decimal, x: Decimal, ctx: PrecisionCtx) -> tuple[Decimal, Decimal]:
    """(d, e) with every valid degree of the form +-d + e*k."""
    theta = _theta(x, ctx)
    with ctx.local():
        return arccos(y, ctx) / theta, two_pi(ctx) / theta


def solve_modular_linear(a: int, b: int, M: int) -> range:
    """All k in [0, M) with k*a = b (mod M), as an arithmetic range."""
    if M < 2:
        raise ValueError("modulus must be >= 2")
    a, b = a % M, b % M
    g = math.gcd(a, M)
    if b % g:
        return range(0)
    step = M // g
    if step == 1:
        return range(0, M)
    k0 = (b // g) * pow(a // g, -1, step) % step
    return range(k0, M, step)


def _round_half_away(v: Decimal) -> int:
    return int(v.to_integral_value(rounding=decimal.ROUND_HALF_UP))


def verification_window(candidate: int, ctx: PrecisionCtx) -> int:
    return ctx.digits - math.ceil(log10_abs(max(candidate, 1))) - VERIFY_SLACK


def check_candidate(candidate: int, x: Decimal, y: Decimal, ctx: PrecisionCtx) -> tuple[int, bool]:
    """(agreement digits of T_candidate(x) with y, accepted?)."""
    if candidate < 0:
        candidate = -candidate
    try:
        value = t_analytic(candidate, x, ctx)
    except PrecisionError:
        return 0, False
    agree = agreement_digits(value, y, cap=ctx.digits)
    return agree, agree >= verification_window(candidate, ctx)


def default_modulus(exponent_bound: int) -> int:
    """10^(number of digits of the exponent bound)."""
    return 10 ** decimal_length(exponent_bound)


def default_search_width(exponent_bound: int, e: Decimal, cap: int = 1000) -> int:
    # |eps| <= k/2 + 1 and k <= bound/e + 1
    k_max = int(Decimal(exponent_bound) / e) + 1
    return min(cap, k_max // 2 + 2)


def run_sieve_attack(x: Decimal, y: Decimal, ctx: PrecisionCtx, M: int, search_width: int = 50,
                     max_classes: int = 4, result: AttackResult | None = None) -> AttackResult:
    """The diophantine sieve against an intercepted y = T_n(x).

    For both signs and every residual eps in [-search_width, search_width],
    solve k*[eM] = eps - [+-dM] (mod M), take up to ``max_classes`` solutions,
    form a = round(+-d + e*k) and verify it with t_analytic.
    """
    d, e = sieve_params(y, x, ctx)
    wide = ctx.widen(decimal_length(M) + 5)
    with wide.local():
        eM = _round_half_away(e * M)
        dM = {+1: _round_half_away(d * M), -1: _round_half_away(-d * M)}
    result = result or AttackResult()
    seen = set()
    for sign in (+1, -1):
        for eps in range(-search_width, search_width + 1):
            for k in itertools.islice(solve_modular_linear(eM, eps - dM[sign], M), max_classes):
                with wide.local():
                    a = abs(_round_half_away(sign * d + e * k))
                if a < 2 or a in seen:
                    continue
                seen.add(a)
                agree, ok = check_candidate(a, x, y, ctx)
                result.note(M, a, agree, ok)
    log.debug("sieve M=%d: %d candidates, %d verified", M, len(seen), len(result.verified))
    return result


def k_scan(x: Decimal, y: Decimal, ctx: PrecisionCtx, k_max: int) -> list[int]:
    """Brute-force cross-check: integers of the form +-d + e*k for k <= k_max."""
    d, e = sieve_params(y, x, ctx)
    found = []
    for k in range(k_max + 1):
        for sign in (1, -1):
            with ctx.local():
                a = sign * d + e * k
            n = _round_half_away(a)
            if n >= 2 and check_candidate(n, x, y, ctx)[1] and n not in found:
                found.append(n)
    return sorted(found)


def leading_digit_match(a: int, b: int) -> int:
    """Number of leading decimal digits shared by two positive integers."""
    sa, sb = str(abs(a)), str(abs(b))
    n = 0
    for ca, cb in zip(sa, sb):
        if ca != cb:
            break
        n += 1
    return n


def brute_force_combinations(fs: FunctionSet, x: Decimal, y: Decimal, ctx: PrecisionCtx,
                             limit: int = BRUTE_FORCE_LIMIT) -> AttackResult:
    """Try every repetition vector of ``fs``; keep those reproducing y at x."""
    count = combination_count(fs)
    if count > limit:
        raise ParameterError(f"{count} combinations exceed the brute-force guard of {limit}")
    result = AttackResult()
    for reps in itertools.product(*(range(w) for w in fs.max_reps)):
        sel = Combination(fs.primes, reps)
        n = exponent_of(sel)
        try:
            value = compose_chain(chain_of(sel), x, ctx)
        except DegenerateValueError:
            result.work += 1
            continue
        agree = agreement_digits(value, y, cap=ctx.digits)
        result.note(None, n, agree, agree >= verification_window(n, ctx))
    return result


@dataclass(frozen=True)
class DivergenceReport:
    r: int
    s: int
    x: Decimal
    degree: int
    low_digits: int
    low_agreement: int
    sign_match: bool
    first_disagreeing_digit: int | None
    recurrence_agreement: int
    high_digits: int
    high_agreement: int


def _first_difference(a: Decimal, b: Decimal, digits: int) -> int | None:
    """1-based position of the first differing significant digit (sign counts as 1)."""
    if (a < 0) != (b < 0):
        return 1
    if a.adjusted() != b.adjusted():
        return 1
    sa, sb = significant_digits(a, digits), significant_digits(b, digits)
    for i, (ca, cb) in enumerate(zip(sa, sb), 1):
        if ca != cb:
            return i
    return None


def compose_two(r: int, s: int, x: Decimal, ctx: PrecisionCtx, evaluator: str) -> tuple[Decimal, Decimal]:
    """(T_r(T_s(x)), T_s(T_r(x))), clamping inner values back into [-1, 1]."""
    fn = EVALUATORS[evaluator]
    rs = fn(r, clamp_unit(fn(s, x, ctx)), ctx)
    sr = fn(s, clamp_unit(fn(r, x, ctx)), ctx)
    return rs, sr


def double_precision_divergence(r: int, s: int, x: Decimal, low_digits: int = 16,
                                high_digits: int = 200) -> DivergenceReport:
    """Compare both composition orders at 16 digits and at a high-precision control.

    The low-precision run uses stored power-basis coefficients, the way a
    binary64 implementation with coefficient tables would; the same inputs are
    also run through the value recurrence at low precision for contrast.  The
    high-precision control uses the recurrence.
    """
    if r * s > 10**6:
        raise ParameterError("r*s must be <= 10^6")
    low = PrecisionCtx(low_digits)
    xl = low.round(x)
    a, b = compose_two(r, s, xl, low, "power")
    ra, rb = compose_two(r, s, xl, low, "recurrence")
    high = PrecisionCtx(high_digits)
    ha, hb = compose_two(r, s, high.round(x), high, "recurrence")
    return DivergenceReport(
        r=r,
        s=s,
        x=xl,
        degree=r * s,
        low_digits=low_digits,
        low_agreement=_agreement_or_zero(a, b, low_digits),
        sign_match=(a < 0) == (b < 0),
        first_disagreeing_digit=_first_difference(a, b, low_digits),
        recurrence_agreement=_agreement_or_zero(ra, rb, low_digits),
        high_digits=high_digits,
        high_agreement=_agreement_or_zero(ha, hb, high_digits),
    )


def _agreement_or_zero(a: Decimal, b: Decimal, cap: int) -> int:
    if a.is_zero() and b.is_zero():
        return cap
    if a.is_zero() or b.is_zero():
        return 0
    return agreement_digits(a, b, cap=cap)


def write_attack_csv(fh, rows):
    """Rows of (M, candidate, agreement_digits, verified, work)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for M, cand, agree, ok, work in rows:
        writer.writerow(("" if M is None else M, cand, agree, int(bool(ok)), work))


__all__ = [
    "AttackResult",
    "DivergenceReport",
    "SieveInstance",
    "arccos_ratio",
    "brute_force_combinations",
    "check_candidate",
    "compose_two",
    "default_modulus",
    "default_search_width",
    "double_precision_divergence",
    "k_scan",
    "leading_digit_match",
    "run_sieve_attack",
    "sieve_params",
    "solve_modular_linear",
    "write_attack_csv",
]
