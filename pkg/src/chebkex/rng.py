"""Random sources allowed to draw public values and secrets.

Protocol code accepts anything with ``randbelow(n)`` and ``token_bytes(n)``,
but :func:`require_protocol_rng` refuses the general-purpose Mersenne
Twister from :mod:`random` (and the module itself).  Two generators ship:

* :class:`SystemRng` -- OS entropy via :mod:`secrets`; the default.
* :class:`HashDrbg` -- a SHA-256 counter-mode generator from a fixed seed, for
  reproducible tests and the CLI's explicitly insecure ``--seed`` mode.
"""

from __future__ import annotations

import hashlib
import random
import secrets
import threading
import types


class SystemRng:
    """Cryptographic randomness from the operating system."""

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("upper bound must be positive")
        return secrets.randbelow(n)

    def token_bytes(self, n: int) -> bytes:
        return secrets.token_bytes(n)

    def __repr__(self):
        return "SystemRng()"


class HashDrbg:
    """Deterministic SHA-256(seed || counter) byte stream.

    Thread-safe.  Only as unpredictable as its seed, which is why nothing in
    the package constructs one implicitly.
    """

    def __init__(self, seed: bytes | str | int):
        if isinstance(seed, int):
            seed = seed.to_bytes((seed.bit_length() + 8) // 8, "big", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode()
        self._key = hashlib.sha256(b"chebkex-drbg" + seed).digest()
        self._counter = 0
        self._buffer = b""
        self._lock = threading.Lock()

    def _take(self, n: int) -> bytes:
        with self._lock:
            while len(self._buffer) < n:
                block = hashlib.sha256(self._key + self._counter.to_bytes(16, "big")).digest()
                self._counter += 1
                self._buffer += block
            out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def token_bytes(self, n: int) -> bytes:
        return self._take(n)

    def randbits(self, k: int) -> int:
        if k <= 0:
            return 0
        raw = int.from_bytes(self._take((k + 7) // 8), "big")
        return raw >> (8 * ((k + 7) // 8) - k)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("upper bound must be positive")
        k = n.bit_length()
        while True:
            r = self.randbits(k)
            if r < n:
                return r

    def fork(self, label: str) -> HashDrbg:
        """An independent child stream, e.g. one per party in a simulation."""
        return HashDrbg(self._key + label.encode())

    def __repr__(self):
        return "HashDrbg(<seeded>)"


def require_protocol_rng(rng):
    """Return ``rng`` if it is acceptable for secret draws, else raise TypeError."""
    if rng is None:
        return SystemRng()
    if isinstance(rng, types.ModuleType) or (
        isinstance(rng, random.Random) and not isinstance(rng, random.SystemRandom)
    ):
        raise TypeError("the general-purpose random module is not a protocol-grade generator")
    if isinstance(rng, random.SystemRandom):
        return _SystemRandomAdapter(rng)
    if not (callable(getattr(rng, "randbelow", None)) and callable(getattr(rng, "token_bytes", None))):
        raise TypeError(f"{type(rng).__name__} does not implement randbelow/token_bytes")
    return rng


class _SystemRandomAdapter:
    def __init__(self, sysrand: random.SystemRandom):
        self._r = sysrand

    def randbelow(self, n: int) -> int:
        return self._r.randrange(n)

    def token_bytes(self, n: int) -> bytes:
        return self._r.randbytes(n)
