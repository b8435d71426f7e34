"""Secret generation: function sets, the three draw strategies and precision sizing.

A party's secret is the degree of a composed Chebyshev map:

* combination -- ``prod p_i ** v_i`` with ``0 <= v_i < w_i`` per prime p_i,
* casket -- the product of ``r`` primes drawn with repetition from the set,
* analytic -- one large random integer, evaluated in a single cos/arccos step.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from math import comb, prod

import numpy as np

from .chebyshev import ChainSpec, compose_chain, t_analytic
from .errors import ParameterError, ParseError
from .realfield import PrecisionCtx, decimal_length
from .rng import require_protocol_rng

SHARED_DIGITS = {128: 50, 256: 90}
SKIPPED_DIGITS = 10
GUARD_DIGITS = 10
DEFAULT_FLOOR = 10**39
MAX_RESAMPLES = 100_000


def first_primes(m: int) -> list[int]:
    """The first ``m`` primes, starting at 2."""
    if m < 1:
        return []
    # p_m < m (ln m + ln ln m) for m >= 6
    limit = 15 if m < 6 else int(m * (math.log(m) + math.log(math.log(m)))) + 1
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(limit) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(range(i * i, limit + 1, i)))
    return [i for i, is_p in enumerate(sieve) if is_p][:m]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        y = pow(a, d, n)
        if y in (1, n - 1):
            continue
        for _ in range(s - 1):
            y = y * y % n
            if y == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class FunctionSet:
    """Prime indices p_i with per-function repetition bounds w_i, drawn from a pool of M."""

    primes: tuple[int, ...]
    max_reps: tuple[int, ...]
    pool_size: int

    def __post_init__(self):
        object.__setattr__(self, "primes", tuple(self.primes))
        object.__setattr__(self, "max_reps", tuple(self.max_reps))
        if not self.primes:
            raise ParameterError("a function set needs at least one prime")
        if len(self.primes) != len(self.max_reps):
            raise ParameterError("primes and max_reps differ in length")
        if len(set(self.primes)) != len(self.primes):
            raise ParameterError("function-set primes must be distinct")
        if not all(is_prime(p) for p in self.primes):
            raise ParameterError("every function index must be prime")
        if any(w < 1 for w in self.max_reps):
            raise ParameterError("repetition bounds must be >= 1")
        if self.pool_size < len(self.primes):
            raise ParameterError("pool size M must be >= N")

    @classmethod
    def uniform(cls, primes, w: int, pool_size: int | None = None) -> FunctionSet:
        primes = tuple(primes)
        return cls(primes, (w,) * len(primes), pool_size or len(primes))

    @property
    def size(self) -> int:
        return len(self.primes)

    @property
    def d_max(self) -> int:
        """prod p_i ** w_i -- the precision-sizing bound on a secret degree."""
        return prod(p**w for p, w in zip(self.primes, self.max_reps))

    @property
    def max_exponent(self) -> int:
        """Largest degree a combination draw can actually produce (v_i = w_i - 1)."""
        return prod(p ** (w - 1) for p, w in zip(self.primes, self.max_reps))


@dataclass(frozen=True)
class SecretConfig:
    """How a party draws its secret; local to the party and never transmitted."""

    variant: str = "combination"
    floor: int = DEFAULT_FLOOR
    casket_size: int = 64
    analytic_digits: tuple[int, int] = (200, 600)

    def __post_init__(self):
        if self.variant not in ("combination", "casket", "analytic"):
            raise ParameterError(f"unknown strategy {self.variant!r}")
        if self.floor < 1:
            raise ParameterError("floor must be >= 1")
        lo, hi = self.analytic_digits
        if not 1 <= lo <= hi:
            raise ParameterError("analytic digit range must satisfy 1 <= lo <= hi")


# Secret selections.  Their reprs are redacted so they never end up in logs.


@dataclass(frozen=True, repr=False)
class Combination:
    primes: tuple[int, ...]
    reps: tuple[int, ...]

    def __repr__(self):
        return "Combination(<redacted>)"


@dataclass(frozen=True, repr=False)
class Casket:
    indices: tuple[int, ...]

    def __repr__(self):
        return "Casket(<redacted>)"


@dataclass(frozen=True, repr=False)
class Analytic:
    n: int

    def __repr__(self):
        return "Analytic(<redacted>)"


SecretSelection = Combination | Casket | Analytic


def exponent_of(sel: SecretSelection) -> int:
    """The composed degree d_v of a selection."""
    if isinstance(sel, Combination):
        return prod(p**v for p, v in zip(sel.primes, sel.reps))
    if isinstance(sel, Casket):
        return prod(sel.indices)
    if isinstance(sel, Analytic):
        return sel.n
    raise TypeError(f"not a secret selection: {type(sel).__name__}")


def chain_of(sel: SecretSelection) -> ChainSpec:
    if isinstance(sel, Combination):
        return ChainSpec(tuple((p, v) for p, v in zip(sel.primes, sel.reps) if v))
    if isinstance(sel, Casket):
        counts: dict[int, int] = {}
        for p in sel.indices:
            counts[p] = counts.get(p, 0) + 1
        return ChainSpec(tuple(sorted(counts.items())))
    raise TypeError("analytic selections have no chain form")


def gen_function_set(n: int, m: int, rng, w: int | tuple[int, ...] = 4) -> FunctionSet:
    """N distinct primes sampled uniformly from the first M primes."""
    if n < 1 or m < n:
        raise ParameterError(f"need M >= N >= 1, got N={n}, M={m}")
    rng = require_protocol_rng(rng)
    pool = first_primes(m)
    for i in range(n):
        j = i + rng.randbelow(m - i)
        pool[i], pool[j] = pool[j], pool[i]
    primes = tuple(sorted(pool[:n]))
    reps = (w,) * n if isinstance(w, int) else tuple(w)
    return FunctionSet(primes, reps, m)


def combination_count(fs: FunctionSet) -> int:
    """s = prod w_i, the number of equally likely combination draws."""
    return prod(fs.max_reps)


def casket_count(n: int, r: int) -> int:
    """Multisets of size r from n functions: C(n + r - 1, r)."""
    if n < 1 or r < 1:
        raise ParameterError("casket_count needs n >= 1 and r >= 1")
    return comb(n + r - 1, r)


def _max_exponent(fs: FunctionSet, config: SecretConfig) -> int:
    if config.variant == "combination":
        return fs.max_exponent
    if config.variant == "casket":
        return max(fs.primes) ** config.casket_size
    return 10 ** config.analytic_digits[1] - 1


def _draw_once(fs: FunctionSet, config: SecretConfig, rng) -> SecretSelection:
    if config.variant == "combination":
        return Combination(fs.primes, tuple(rng.randbelow(w) for w in fs.max_reps))
    if config.variant == "casket":
        picks = (fs.primes[rng.randbelow(fs.size)] for _ in range(config.casket_size))
        return Casket(tuple(sorted(picks)))
    lo, hi = config.analytic_digits
    low = 10 ** (lo - 1)
    return Analytic(low + rng.randbelow(10**hi - low))


def draw_secret(fs: FunctionSet, config: SecretConfig, rng) -> SecretSelection:
    """Draw a selection, resampling until its degree reaches ``config.floor``."""
    rng = require_protocol_rng(rng)
    if _max_exponent(fs, config) < config.floor:
        raise ParameterError("the security floor is unreachable with this function set")
    for _ in range(MAX_RESAMPLES):
        sel = _draw_once(fs, config, rng)
        if exponent_of(sel) >= max(config.floor, 2):
            return sel
    raise ParameterError("security floor reachable but too unlikely to hit by resampling")


def _ceil_log10(n: int) -> int:
    length = decimal_length(n)
    return length - 1 if n == 10 ** (length - 1) else length


def required_precision(fs: FunctionSet, security_bits: int) -> int:
    """ceil(log10 d_max) + shared digits (50 or 90) + 10 guard digits."""
    if security_bits not in SHARED_DIGITS:
        raise ParameterError("security_bits must be 128 or 256")
    return _ceil_log10(fs.d_max) + SHARED_DIGITS[security_bits] + GUARD_DIGITS


def analytic_required_precision(max_digits: int, security_bits: int) -> int:
    """Precision for the analytic strategy.

    t_analytic rounds correctly with respect to its input, so each party's
    shared value is off by at most its own degree times one ulp: the loss is
    log10(max(r, s)), not log10(r*s).
    """
    if security_bits not in SHARED_DIGITS:
        raise ParameterError("security_bits must be 128 or 256")
    return max_digits + SHARED_DIGITS[security_bits] + GUARD_DIGITS


def evaluate_secret(sel: SecretSelection, x, ctx: PrecisionCtx):
    """T_{d_v}(x) by chain composition, or analytically for Analytic selections."""
    if isinstance(sel, Analytic):
        return t_analytic(sel.n, x, ctx)
    return compose_chain(chain_of(sel), x, ctx)


# --- suites -------------------------------------------------------------------

_DESCRIPTOR_RE = re.compile(
    r"SUITE v1 N=(\d+) M=(\d+) W=([\d,]+) P=([\d,]+) SEC=(\d+) DIGITS=(\d+)"
)


@dataclass(frozen=True)
class Suite:
    """Public parameter bundle both parties must share: pool, bounds, security, precision."""

    function_set: FunctionSet
    security_bits: int = 128
    digits: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.security_bits not in SHARED_DIGITS:
            raise ParameterError("security_bits must be 128 or 256")
        if self.digits == 0:
            object.__setattr__(self, "digits", required_precision(self.function_set, self.security_bits))
        PrecisionCtx(self.digits)

    @property
    def ctx(self) -> PrecisionCtx:
        return PrecisionCtx(self.digits)

    @property
    def required_digits(self) -> int:
        return required_precision(self.function_set, self.security_bits)

    def descriptor(self) -> str:
        fs = self.function_set
        return (
            f"SUITE v1 N={fs.size} M={fs.pool_size} "
            f"W={','.join(map(str, fs.max_reps))} P={','.join(map(str, fs.primes))} "
            f"SEC={self.security_bits} DIGITS={self.digits}"
        )

    @property
    def suite_id(self) -> str:
        return hashlib.sha256(self.descriptor().encode()).hexdigest()[:32]

    @classmethod
    def from_descriptor(cls, line: str, name: str = "") -> Suite:
        match = _DESCRIPTOR_RE.fullmatch(line.strip())
        if not match:
            raise ParseError(f"malformed suite descriptor: {line!r}")
        n, m, w, p, sec, digits = match.groups()
        reps = tuple(int(v) for v in w.split(","))
        primes = tuple(int(v) for v in p.split(","))
        if len(primes) != int(n):
            raise ParseError("descriptor N does not match the prime list")
        fs = FunctionSet(primes, reps, int(m))
        return cls(fs, int(sec), int(digits), name)

    def with_digits(self, digits: int) -> Suite:
        return Suite(self.function_set, self.security_bits, digits, self.name)


def shipped_suites(security_bits: int = 128) -> dict[str, tuple[Suite, SecretConfig]]:
    """The built-in configurations keyed by name ``<functions>-<iterations>``."""
    out = {}
    for n, w, floor in ((4, 2, 2), (32, 8, DEFAULT_FLOOR), (64, 4, DEFAULT_FLOOR), (128, 2, DEFAULT_FLOOR)):
        name = f"{n}-{w}"
        fs = FunctionSet.uniform(first_primes(n), w)
        out[name] = (Suite(fs, security_bits, name=name), SecretConfig(floor=floor))
    return out


# --- magnitude statistics ---------------------------------------------------------


@dataclass
class MagnitudeStats:
    log10_exponents: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    mean: float
    std: float
    expected_mean: float
    expected_std: float


def expected_log10_moments(fs: FunctionSet) -> tuple[float, float]:
    """Mean and standard deviation of log10(d_v) for uniform v_i on {0..w_i-1}."""
    logs = np.log10(np.array(fs.primes, dtype=float))
    w = np.array(fs.max_reps, dtype=float)
    mean = float(np.sum((w - 1) / 2 * logs))
    var = float(np.sum((w * w - 1) / 12 * logs * logs))
    return mean, math.sqrt(var)


def simulate_magnitude_distribution(
    fs: FunctionSet, trials: int, rng, *, config: SecretConfig | None = None, bin_width: float | None = None
) -> MagnitudeStats:
    """Histogram of log10(d_v) over ``trials`` combination draws.

    With the default ``floor=1`` no resampling happens, so the sample mean is
    directly comparable to sum E[v_i] log10 p_i.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    config = config or SecretConfig(floor=1)
    rng = require_protocol_rng(rng)
    values = np.empty(trials)
    for i in range(trials):
        sel = draw_secret(fs, config, rng) if config.floor > 1 else _draw_once(fs, config, rng)
        values[i] = math.log10(exponent_of(sel))
    exp_mean, exp_std = expected_log10_moments(fs)
    width = bin_width or max(exp_std / 2, 0.05)
    lo = math.floor(values.min() / width) * width
    hi = (math.floor(values.max() / width) + 1) * width
    edges = np.arange(lo, hi + width / 2, width)
    counts, edges = np.histogram(values, bins=edges)
    return MagnitudeStats(
        log10_exponents=values,
        counts=counts,
        edges=edges,
        mean=float(values.mean()),
        std=float(values.std(ddof=1)) if trials > 1 else 0.0,
        expected_mean=exp_mean,
        expected_std=exp_std,
    )


def is_unimodal(counts, noise_sigmas: float = 2.0) -> bool:
    """Counts rise to a single peak and then fall, ignoring Poisson-sized wiggles."""
    counts = [int(c) for c in counts]
    peak = max(range(len(counts)), key=counts.__getitem__)

    def monotone(seq):
        running = seq[0]
        for c in seq[1:]:
            if c < running - noise_sigmas * math.sqrt(max(running, 1)):
                return False
            running = max(running, c)
        return True

    return monotone(counts[: peak + 1]) and monotone(counts[peak:][::-1])


__all__ = [
    "FunctionSet",
    "SecretConfig",
    "Combination",
    "Casket",
    "Analytic",
    "Suite",
    "first_primes",
    "gen_function_set",
    "combination_count",
    "casket_count",
    "draw_secret",
    "exponent_of",
    "chain_of",
    "required_precision",
    "analytic_required_precision",
    "evaluate_secret",
    "shipped_suites",
    "simulate_magnitude_distribution",
    "expected_log10_moments",
    "is_unimodal",
]
