"""Key agreement from commuting Chebyshev polynomials over high-precision reals."""

from .errors import (
    DegenerateValueError,
    DomainError,
    HandshakeFailed,
    KexError,
    ParameterError,
    ParseError,
    PrecisionError,
    ProtocolError,
    TransportError,
)
from .protocol import KeyMaterial, SessionConfig, create_offer, finalize, handshake_in_memory, respond
from .realfield import PrecisionCtx
from .rng import HashDrbg, SystemRng
from .strategy import FunctionSet, SecretConfig, Suite, shipped_suites

__version__ = "0.1.0"

__all__ = [
    "DegenerateValueError",
    "DomainError",
    "FunctionSet",
    "HandshakeFailed",
    "HashDrbg",
    "KexError",
    "KeyMaterial",
    "ParameterError",
    "ParseError",
    "PrecisionCtx",
    "PrecisionError",
    "ProtocolError",
    "SecretConfig",
    "SessionConfig",
    "Suite",
    "SystemRng",
    "TransportError",
    "create_offer",
    "finalize",
    "handshake_in_memory",
    "respond",
    "shipped_suites",
]
