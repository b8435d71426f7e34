import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chebkex.errors import ParameterError, ParseError
from chebkex.rng import HashDrbg
from chebkex.strategy import (
    Analytic,
    Casket,
    Combination,
    FunctionSet,
    SecretConfig,
    Suite,
    analytic_required_precision,
    casket_count,
    chain_of,
    combination_count,
    draw_secret,
    evaluate_secret,
    expected_log10_moments,
    exponent_of,
    first_primes,
    gen_function_set,
    is_prime,
    is_unimodal,
    required_precision,
    simulate_magnitude_distribution,
)
from chebkex.realfield import PrecisionCtx, agreement_digits
from chebkex.chebyshev import t_analytic
from decimal import Decimal


def test_first_primes():
    assert first_primes(10) == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert first_primes(128)[-1] == 719
    assert all(is_prime(p) for p in first_primes(200))
    assert not any(is_prime(n) for n in (0, 1, 4, 561, 7919 * 7927))


def test_function_set_validation():
    with pytest.raises(ParameterError):
        FunctionSet((4, 5), (2, 2), 2)
    with pytest.raises(ParameterError):
        FunctionSet((3, 3), (2, 2), 2)
    with pytest.raises(ParameterError):
        FunctionSet((3, 5), (2,), 2)
    with pytest.raises(ParameterError):
        FunctionSet((3, 5), (2, 0), 2)


def test_counts_match_enumeration():
    for w in itertools.product(range(1, 5), repeat=3):
        fs = FunctionSet((2, 3, 5), w, 3)
        assert combination_count(fs) == sum(1 for _ in itertools.product(*(range(k) for k in w)))
    for n in range(1, 7):
        for r in range(1, 6):
            brute = len(set(itertools.combinations_with_replacement(range(n), r)))
            assert casket_count(n, r) == brute


def test_headline_counts(suites):
    assert combination_count(suites["128-2"][0].function_set) == 2**128
    assert combination_count(suites["64-4"][0].function_set) == 2**128
    # 32 functions with w = 8 give 8^32 = 2^96
    assert combination_count(suites["32-8"][0].function_set) == 2**96


def test_required_precision(suites):
    fs = FunctionSet((2, 3), (2, 2), 2)  # d_max = 36
    assert required_precision(fs, 128) == 2 + 50 + 10
    assert required_precision(fs, 256) == 2 + 90 + 10
    fs = FunctionSet((2, 5), (1, 1), 2)  # d_max = 10, exact power of ten
    assert required_precision(fs, 128) == 1 + 60
    s64 = suites["64-4"][0]
    assert s64.digits >= math.ceil(math.log10(s64.function_set.d_max)) + 60
    assert analytic_required_precision(600, 128) == 660


def test_descriptor_round_trip(suites):
    for suite, _ in suites.values():
        back = Suite.from_descriptor(suite.descriptor())
        assert back == suite
        assert back.suite_id == suite.suite_id
    ids = {s.suite_id for s, _ in suites.values()}
    assert len(ids) == len(suites)
    with pytest.raises(ParseError):
        Suite.from_descriptor("SUITE v2 N=1")


def test_suite_id_depends_on_precision(suites):
    s = suites["4-2"][0]
    assert s.with_digits(80).suite_id != s.suite_id


def test_gen_function_set():
    fs = gen_function_set(8, 20, HashDrbg(3), w=3)
    assert fs.size == 8 and fs.pool_size == 20
    assert set(fs.primes) <= set(first_primes(20))
    with pytest.raises(ParameterError):
        gen_function_set(5, 4, HashDrbg(3))


@given(st.integers(0, 2**32))
def test_draw_respects_floor(seed):
    fs = FunctionSet.uniform(first_primes(16), 3)
    cfg = SecretConfig(floor=10**12)
    sel = draw_secret(fs, cfg, HashDrbg(seed))
    assert exponent_of(sel) >= 10**12
    assert all(0 <= v < 3 for v in sel.reps)


def test_unreachable_floor():
    fs = FunctionSet.uniform((2, 3), 2)
    with pytest.raises(ParameterError):
        draw_secret(fs, SecretConfig(floor=100), HashDrbg(0))


def test_casket_and_analytic_draws():
    fs = FunctionSet.uniform(first_primes(8), 2)
    sel = draw_secret(fs, SecretConfig("casket", floor=10, casket_size=6), HashDrbg(1))
    assert len(sel.indices) == 6 and exponent_of(sel) == math.prod(sel.indices)
    sel = draw_secret(fs, SecretConfig("analytic", floor=10, analytic_digits=(20, 30)), HashDrbg(1))
    assert 10**19 <= sel.n < 10**30


def test_selection_reprs_redacted():
    for sel in (Combination((2, 3), (1, 1)), Casket((2, 3)), Analytic(123456789)):
        assert "redacted" in repr(sel)
        assert "123456789" not in repr(sel)


def test_evaluate_secret_paths_agree():
    ctx = PrecisionCtx(60)
    x = Decimal("0.4321")
    comb = Combination((3, 5, 7), (2, 1, 1))
    cask = Casket((3, 3, 5, 7))
    assert exponent_of(comb) == exponent_of(cask) == 315
    assert chain_of(comb) == chain_of(cask)
    ref = t_analytic(315, x, ctx)
    assert agreement_digits(evaluate_secret(comb, x, ctx), ref) >= 55
    assert evaluate_secret(Analytic(315), x, ctx) == ref


def test_expected_moments():
    fs = FunctionSet((2, 5), (3, 3), 2)
    mean, std = expected_log10_moments(fs)
    assert mean == pytest.approx(1.0)  # E[v] = 1 for w = 3; log10 2 + log10 5 = 1
    assert std > 0


def test_magnitude_simulation_matches_expectation():
    fs = FunctionSet.uniform(first_primes(64), 4)
    mag = simulate_magnitude_distribution(fs, 3000, HashDrbg(2))
    assert mag.mean == pytest.approx(mag.expected_mean, rel=0.02)
    assert mag.counts.sum() == 3000


def test_is_unimodal():
    assert is_unimodal([1, 5, 20, 50, 30, 8, 1])
    assert not is_unimodal([50, 5, 0, 5, 50])
