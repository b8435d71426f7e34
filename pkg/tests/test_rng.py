import random

import pytest

from chebkex.rng import HashDrbg, SystemRng, require_protocol_rng
from chebkex.strategy import SecretConfig, draw_secret, first_primes, FunctionSet


def test_rejects_general_purpose_random():
    with pytest.raises(TypeError):
        require_protocol_rng(random)
    with pytest.raises(TypeError):
        require_protocol_rng(random.Random(1))
    with pytest.raises(TypeError):
        require_protocol_rng(object())


def test_secret_draw_refuses_mersenne_twister():
    fs = FunctionSet.uniform(first_primes(4), 2)
    with pytest.raises(TypeError):
        draw_secret(fs, SecretConfig(floor=2), random.Random(0))


def test_system_random_is_wrapped():
    rng = require_protocol_rng(random.SystemRandom())
    assert 0 <= rng.randbelow(10) < 10
    assert len(rng.token_bytes(5)) == 5


def test_default_is_system():
    assert isinstance(require_protocol_rng(None), SystemRng)


def test_drbg_deterministic_and_seed_sensitive():
    a, b, c = HashDrbg(7), HashDrbg(7), HashDrbg(8)
    assert a.token_bytes(40) == b.token_bytes(40)
    assert HashDrbg(7).token_bytes(40) != c.token_bytes(40)
    assert HashDrbg("x").fork("a").token_bytes(8) != HashDrbg("x").fork("b").token_bytes(8)
    assert "7" not in repr(a)


def test_drbg_randbelow_range_and_spread():
    rng = HashDrbg(1)
    counts = [0] * 7
    for _ in range(7000):
        counts[rng.randbelow(7)] += 1
    assert min(counts) > 850
    with pytest.raises(ValueError):
        rng.randbelow(0)
