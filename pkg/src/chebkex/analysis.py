"""Statistics and cost studies: digit uniformity of shared secrets, secret
magnitude histograms, the storage/time cost estimators, and measured scaling
of evaluation time with precision.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass
from decimal import Decimal

import numpy as np
from scipy import stats

from .errors import ParameterError
from .protocol import SessionConfig, handshake_in_memory
from .realfield import PrecisionCtx, significant_digits
from .rng import require_protocol_rng
from .strategy import (
    Combination,
    FunctionSet,
    MagnitudeStats,
    Suite,
    evaluate_secret,
    simulate_magnitude_distribution,
)

MIN_DIGIT_SAMPLE = 500
DIGIT_COLUMNS = ("position",) + tuple(f"count_{d}" for d in range(10)) + ("chi2", "p")


@dataclass
class DigitSample:
    """Counts of each decimal digit at each significant position (1-based)."""

    counts: np.ndarray  # shape (positions, 10)
    size: int

    @classmethod
    def from_values(cls, values, positions: int) -> DigitSample:
        counts = np.zeros((positions, 10), dtype=np.int64)
        n = 0
        for v in values:
            digits = significant_digits(v, positions)
            counts[np.arange(positions), [int(c) for c in digits]] += 1
            n += 1
        return cls(counts, n)

    @classmethod
    def from_digit_strings(cls, strings, positions: int) -> DigitSample:
        counts = np.zeros((positions, 10), dtype=np.int64)
        n = 0
        for s in strings:
            counts[np.arange(positions), [int(c) for c in s[:positions]]] += 1
            n += 1
        return cls(counts, n)

    @property
    def positions(self) -> int:
        return self.counts.shape[0]


@dataclass(frozen=True)
class DigitTest:
    position: int
    counts: tuple[int, ...]
    chi2: float
    p: float


def digit_uniformity(sample: DigitSample, positions=None) -> list[DigitTest]:
    """Chi-square against uniform 0..9 (9 degrees of freedom) at each position."""
    if sample.size < MIN_DIGIT_SAMPLE:
        raise ParameterError(f"need at least {MIN_DIGIT_SAMPLE} samples, got {sample.size}")
    positions = positions or range(1, sample.positions + 1)
    out = []
    for pos in positions:
        row = sample.counts[pos - 1]
        chi2, p = stats.chisquare(row)
        out.append(DigitTest(pos, tuple(int(c) for c in row), float(chi2), float(p)))
    return out


def chi2_critical(alpha: float = 0.01, dof: int = 9) -> float:
    return float(stats.chi2.isf(alpha, dof))


def collect_shared_secrets(cfg: SessionConfig, count: int, rng) -> list[Decimal]:
    """Shared values from ``count`` full in-memory handshakes (analysis only)."""
    rng = require_protocol_rng(rng)
    out = []
    for _ in range(count):
        outcome = handshake_in_memory(cfg, rng_initiator=rng, rng_responder=rng)
        out.append(outcome.responder.shared)
    return out


def write_digit_csv(fh, tests: list[DigitTest]):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(DIGIT_COLUMNS)
    for t in tests:
        writer.writerow((t.position, *t.counts, f"{t.chi2:.6g}", f"{t.p:.6g}"))


# --- cost model ---------------------------------------------------------------------


@dataclass(frozen=True)
class CostEstimate:
    storage_units: int
    time_units: float


def estimate_cost(fs: FunctionSet, digits: int, a: float = 2.0) -> CostEstimate:
    """storage = sum(p_i) * digits; time = digits^a * sum(p_i * w_i)."""
    if not 1.4 < a <= 2:
        raise ParameterError("the exponent a must lie in (1.4, 2]")
    storage = sum(fs.primes) * digits
    work = sum(p * w for p, w in zip(fs.primes, fs.max_reps))
    return CostEstimate(storage, digits**a * work)


# --- scaling ----------------------------------------------------------------------


SCALING_COLUMNS = ("suite", "digits", "repetition", "seconds", "median_seconds", "fitted_a")


@dataclass
class ScalingResult:
    samples: dict[str, dict[int, list[float]]]
    fits: dict[str, float]

    def medians(self, suite: str) -> dict[int, float]:
        return {d: statistics.median(ts) for d, ts in sorted(self.samples[suite].items())}

    def spread(self, suite: str) -> dict[int, float]:
        """Relative spread (max - min) / median of the repetitions per grid point."""
        out = {}
        for d, ts in sorted(self.samples[suite].items()):
            med = statistics.median(ts)
            out[d] = (max(ts) - min(ts)) / med if med else 0.0
        return out


def _time_once(fn, min_seconds: float) -> float:
    loops = 1
    while True:
        start = time.perf_counter()
        for _ in range(loops):
            fn()
        elapsed = time.perf_counter() - start
        if elapsed >= min_seconds:
            return elapsed / loops
        loops *= 2


def measure_scaling(suites: list[Suite], digit_grid=(1000, 2000, 4000, 8000), repetitions: int = 3,
                    min_seconds: float = 0.05) -> ScalingResult:
    """Time one fixed full-degree evaluation per suite across a precision grid.

    The exponent a is the least-squares slope of log(median time) against
    log(digits).
    """
    samples: dict[str, dict[int, list[float]]] = {}
    fits = {}
    for suite in suites:
        fs = suite.function_set
        sel = Combination(fs.primes, tuple(w - 1 for w in fs.max_reps))
        name = suite.name or suite.suite_id[:8]
        per = samples[name] = {}
        for digits in digit_grid:
            ctx = PrecisionCtx(digits)
            with ctx.local():
                x = Decimal(1) / Decimal(3)
            per[digits] = [
                _time_once(lambda: evaluate_secret(sel, x, ctx), min_seconds) for _ in range(repetitions)
            ]
        grid = sorted(per)
        med = [statistics.median(per[d]) for d in grid]
        slope, _ = np.polyfit(np.log(grid), np.log(med), 1)
        fits[name] = float(slope)
    return ScalingResult(samples, fits)


def write_scaling_csv(fh, result: ScalingResult):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SCALING_COLUMNS)
    for name, per in result.samples.items():
        medians = result.medians(name)
        for digits in sorted(per):
            for i, t in enumerate(per[digits]):
                writer.writerow((name, digits, i, f"{t:.6g}", f"{medians[digits]:.6g}", f"{result.fits[name]:.4f}"))


# --- magnitude histogram ------------------------------------------------------------


MAGNITUDE_COLUMNS = ("bin_lo", "bin_hi", "count", "expected")


def magnitude_report(fs: FunctionSet, trials: int, rng, bin_width: float | None = None) -> MagnitudeStats:
    if trials < 1000:
        raise ParameterError("magnitude_report needs at least 1000 trials")
    return simulate_magnitude_distribution(fs, trials, rng, bin_width=bin_width)


def expected_counts(mag: MagnitudeStats) -> np.ndarray:
    """Normal-approximation overlay: expected draws per bin."""
    n = len(mag.log10_exponents)
    cdf = stats.norm.cdf(mag.edges, loc=mag.expected_mean, scale=mag.expected_std)
    return n * np.diff(cdf)


def write_magnitude_csv(fh, mag: MagnitudeStats):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(MAGNITUDE_COLUMNS)
    for lo, hi, c, e in zip(mag.edges[:-1], mag.edges[1:], mag.counts, expected_counts(mag)):
        writer.writerow((f"{lo:.4f}", f"{hi:.4f}", int(c), f"{e:.2f}"))


def mode_bin(mag: MagnitudeStats) -> float:
    i = int(np.argmax(mag.counts))
    return float((mag.edges[i] + mag.edges[i + 1]) / 2)


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b else math.inf
