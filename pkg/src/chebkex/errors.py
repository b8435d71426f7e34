"""Exception hierarchy shared by every module of the package."""


class KexError(Exception):
    """Base class for all errors raised by chebkex."""


class ParseError(KexError, ValueError):
    """A decimal string or descriptor did not match its grammar."""


class DomainError(KexError, ValueError):
    """An argument lies outside the domain of a function (e.g. arccos of 1.5)."""


class PrecisionError(KexError):
    """The requested computation cannot be carried out at the available precision."""


class ParameterError(KexError, ValueError):
    """Invalid suite, function-set or strategy parameters."""


class DegenerateValueError(KexError):
    """An evaluation produced a value too close to -1, 0 or 1."""


class ProtocolError(KexError):
    """A handshake message was invalid, unexpected or out of order."""

    def __init__(self, message, code="protocol-violation"):
        super().__init__(message)
        self.code = code


class HandshakeFailed(ProtocolError):
    """The handshake ended in the Failed state."""

    def __init__(self, message, code="failed", diagnostic=None):
        super().__init__(message, code)
        self.diagnostic = diagnostic


class TransportError(KexError):
    """Connection refused, reset or timed out."""
