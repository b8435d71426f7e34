"""Two-party handshake over commuting Chebyshev maps.

Message flow (initiator I, responder R)::

    I -> R  OFFER    suite id, public x, y = T_r(x), nonce
    R -> I  RESPOND  y2 = T_s(x), confirmation tag of R's key
    I -> R  CONFIRM  I's tag, once it matched            (or)
    I -> R  RESUME   a fresh offer after a tag mismatch  (or)
    I -> R  REJECT   after max_resumes mismatches

Both sides evaluate T_{rs}(x) through different paths; rounding means the
values agree only on a leading window of digits, and the key is hashed from
digits 11..60 (128-bit) or 11..100 (256-bit) of that window.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import logging
from dataclasses import dataclass, field
from decimal import Decimal

from .chebyshev import is_degenerate
from .errors import DegenerateValueError, HandshakeFailed, ParameterError, PrecisionError, ProtocolError
from .realfield import PrecisionCtx, agreement_digits, significant_digits
from .rng import require_protocol_rng
from .strategy import (
    SKIPPED_DIGITS,
    SHARED_DIGITS,
    SecretConfig,
    Suite,
    analytic_required_precision,
    draw_secret,
    evaluate_secret,
    exponent_of,
)

log = logging.getLogger(__name__)

X_MIN = Decimal("0.01")
X_MAX = Decimal("0.99")
MAX_REPICKS = 10
NONCE_BYTES = 16
TAG_BYTES = 16
FINGERPRINT_BYTES = 8

KEY_DOMAIN = b"QRKE-KEY"
CONFIRM_DOMAIN = b"QRKE-CONFIRM"


class State(enum.Enum):
    INIT = "Init"
    OFFER_SENT = "OfferSent"
    RESPONDED = "Responded"
    CONFIRMED = "Confirmed"
    FAILED = "Failed"


class Role(enum.Enum):
    INITIATOR = "initiator"
    RESPONDER = "responder"


# --- messages -------------------------------------------------------------------


@dataclass(frozen=True)
class OfferMsg:
    """OFFER when ``attempt == 0``, RESUME afterwards."""

    suite_id: str
    x: Decimal
    y: Decimal
    nonce: str
    attempt: int = 0


@dataclass(frozen=True)
class RespondMsg:
    nonce: str
    y: Decimal
    confirm_tag: bytes


@dataclass(frozen=True)
class ConfirmMsg:
    nonce: str
    confirm_tag: bytes


@dataclass(frozen=True)
class RejectMsg:
    nonce: str
    reason: str


# --- configuration and state -------------------------------------------------------


@dataclass(frozen=True)
class SessionConfig:
    suite: Suite
    secret: SecretConfig = field(default_factory=SecretConfig)
    max_resumes: int = 3
    # fault injection only: permit a precision below the sizing rule
    allow_undersized: bool = False

    def __post_init__(self):
        if self.max_resumes < 0:
            raise ParameterError("max_resumes must be >= 0")
        if not self.allow_undersized and self.suite.digits < self.required_digits:
            raise ParameterError(
                f"suite precision {self.suite.digits} is below the required {self.required_digits} digits"
            )

    @property
    def ctx(self) -> PrecisionCtx:
        return self.suite.ctx

    @property
    def security_bits(self) -> int:
        return self.suite.security_bits

    @property
    def required_digits(self) -> int:
        if self.secret.variant == "analytic":
            return analytic_required_precision(self.secret.analytic_digits[1], self.suite.security_bits)
        return self.suite.required_digits


@dataclass(frozen=True, repr=False)
class KeyMaterial:
    key: bytes
    confirm_tag: bytes
    digit_window: str
    confirm_hash: bytes

    @property
    def fingerprint(self) -> str:
        """First 8 octets of the confirmation hash, hex; safe to display."""
        return self.confirm_hash[:FINGERPRINT_BYTES].hex()

    def __repr__(self):
        return f"KeyMaterial(fingerprint={self.fingerprint})"


@dataclass(frozen=True)
class ResumeDecision:
    offer: OfferMsg
    diagnostic: str


@dataclass(eq=False)
class Session:
    role: Role
    config: SessionConfig
    state: State = State.INIT
    x: Decimal | None = None
    my_value: Decimal | None = None
    peer_value: Decimal | None = None
    nonce: str = ""
    resume_count: int = 0
    diagnostic: str = ""
    my_secret: object = field(default=None, repr=False)
    key: KeyMaterial | None = field(default=None, repr=False)
    shared: Decimal | None = field(default=None, repr=False)

    def _require(self, role: Role, *states: State):
        if self.role is not role:
            raise ProtocolError(f"{self.role.value} session cannot do this", "out-of-order")
        if self.state not in states:
            raise ProtocolError(f"unexpected message in state {self.state.value}", "out-of-order")

    def fail(self, diagnostic: str):
        self.state = State.FAILED
        self.diagnostic = diagnostic


# --- operations -------------------------------------------------------------------


def pick_public_x(ctx: PrecisionCtx, rng) -> Decimal:
    """Uniform over [-0.99, -0.01] u [0.01, 0.99] on a 10^-digits grid."""
    rng = require_protocol_rng(rng)
    steps = (X_MAX - X_MIN).scaleb(ctx.digits)
    u = rng.randbelow(int(steps) + 1)
    with ctx.local():
        magnitude = X_MIN + Decimal(u).scaleb(-ctx.digits)
    return magnitude.copy_negate() if rng.randbelow(2) else magnitude


def in_public_range(x: Decimal) -> bool:
    return X_MIN <= x.copy_abs() <= X_MAX


def derive_key(shared: Decimal, security_bits: int, ctx: PrecisionCtx) -> KeyMaterial:
    """Hash digits 11..(10 + 50|90) of |shared| into a key and a confirmation tag."""
    if security_bits not in SHARED_DIGITS:
        raise ParameterError("security_bits must be 128 or 256")
    needed = SKIPPED_DIGITS + SHARED_DIGITS[security_bits]
    if ctx.digits < needed:
        raise PrecisionError(f"need {needed} stable digits, precision is only {ctx.digits}")
    if shared.is_zero() or shared.copy_abs() > 1:
        raise PrecisionError("shared value is degenerate")
    window = significant_digits(shared, ctx.digits)[SKIPPED_DIGITS:needed]
    material = window.encode("ascii")
    key = hashlib.sha256(KEY_DOMAIN + material).digest()[: security_bits // 8]
    confirm_hash = hashlib.sha256(CONFIRM_DOMAIN + material).digest()
    return KeyMaterial(key, confirm_hash[:TAG_BYTES], window, confirm_hash)


def _fresh_nonce(rng) -> str:
    return rng.token_bytes(NONCE_BYTES).hex()


def _draw_and_evaluate(cfg: SessionConfig, x: Decimal, rng):
    for _ in range(MAX_REPICKS):
        secret = draw_secret(cfg.suite.function_set, cfg.secret, rng)
        try:
            value = evaluate_secret(secret, x, cfg.ctx)
        except DegenerateValueError:
            continue
        if not is_degenerate(value, cfg.ctx):
            return secret, value
    return None, None


def _new_offer(session: Session, rng) -> OfferMsg:
    cfg = session.config
    for _ in range(MAX_REPICKS):
        x = pick_public_x(cfg.ctx, rng)
        secret, y = _draw_and_evaluate(cfg, x, rng)
        if secret is not None:
            break
    else:
        session.fail("degenerate public value after repeated re-picks")
        raise HandshakeFailed("could not produce a non-degenerate offer", "degenerate")
    session.x, session.my_secret, session.my_value = x, secret, y
    session.nonce = _fresh_nonce(rng)
    session.state = State.OFFER_SENT
    log.debug("offer prepared (attempt %d, suite %s)", session.resume_count, cfg.suite.suite_id)
    return OfferMsg(cfg.suite.suite_id, x, y, session.nonce, session.resume_count)


def create_offer(cfg: SessionConfig, rng=None) -> tuple[Session, OfferMsg]:
    """Initiator: pick x, draw r, publish T_r(x)."""
    rng = require_protocol_rng(rng)
    session = Session(Role.INITIATOR, cfg)
    return session, _new_offer(session, rng)


def _check_public_value(v: Decimal, ctx: PrecisionCtx, what: str):
    if not v.is_finite() or not (-1 < v < 1) or is_degenerate(v, ctx):
        raise ProtocolError(f"{what} outside the legal range", "bad-value")


def respond(cfg: SessionConfig, offer: OfferMsg, rng=None) -> tuple[Session, RespondMsg]:
    """Responder: check the offer, draw s, compute T_s(y) and T_s(x)."""
    rng = require_protocol_rng(rng)
    if offer.suite_id != cfg.suite.suite_id:
        raise ProtocolError("offer names an unknown suite", "unknown-suite")
    if not in_public_range(offer.x):
        raise ProtocolError("public x outside [0.01, 0.99] in magnitude", "bad-x")
    _check_public_value(offer.y, cfg.ctx, "offered value")
    ctx = cfg.ctx
    x, y = ctx.round(offer.x), ctx.round(offer.y)
    session = Session(Role.RESPONDER, cfg, x=x, peer_value=y, nonce=offer.nonce, resume_count=offer.attempt)
    for _ in range(MAX_REPICKS):
        secret, y2 = _draw_and_evaluate(cfg, x, rng)
        if secret is None:
            break
        try:
            shared = evaluate_secret(secret, y, ctx)
        except DegenerateValueError:
            continue
        if not is_degenerate(shared, ctx):
            break
    else:
        secret = None
    if secret is None:
        session.fail("degenerate values while responding")
        raise HandshakeFailed("responder could not avoid degenerate values", "degenerate")
    session.my_secret, session.my_value, session.shared = secret, y2, shared
    session.key = derive_key(shared, cfg.security_bits, ctx)
    session.state = State.RESPONDED
    return session, RespondMsg(offer.nonce, y2, session.key.confirm_tag)


def finalize(session: Session, msg: RespondMsg, rng=None) -> KeyMaterial | ResumeDecision:
    """Initiator: compute T_r(y2), compare tags, confirm or resume."""
    session._require(Role.INITIATOR, State.OFFER_SENT)
    if msg.nonce != session.nonce:
        raise ProtocolError("response does not answer the current offer", "bad-nonce")
    cfg = session.config
    _check_public_value(msg.y, cfg.ctx, "response value")
    session.peer_value = cfg.ctx.round(msg.y)
    try:
        shared = evaluate_secret(session.my_secret, session.peer_value, cfg.ctx)
        key = derive_key(shared, cfg.security_bits, cfg.ctx)
    except (DegenerateValueError, PrecisionError) as exc:
        shared, key = None, None
        reason = str(exc)
    if key is not None and hmac.compare_digest(key.confirm_tag, msg.confirm_tag):
        session.shared, session.key = shared, key
        session.state = State.CONFIRMED
        log.info("handshake confirmed, fingerprint %s", key.fingerprint)
        return key
    expected = cfg.ctx.digits - _loss_estimate(session)
    diagnostic = (
        f"confirmation mismatch on attempt {session.resume_count}: expected >= "
        f"{SKIPPED_DIGITS + SHARED_DIGITS[cfg.security_bits]} agreeing digits, "
        f"estimated stable digits {expected}"
    )
    if key is None:
        diagnostic += f" ({reason})"
    log.info(diagnostic)
    if session.resume_count >= cfg.max_resumes:
        session.fail(diagnostic)
        raise HandshakeFailed("confirmation failed after all resumes", "mismatch", diagnostic)
    session.resume_count += 1
    rng = require_protocol_rng(rng)
    return ResumeDecision(_new_offer(session, rng), diagnostic)


def _loss_estimate(session: Session) -> int:
    from .chebyshev import error_budget

    degree = exponent_of(session.my_secret) ** 2
    return error_budget(degree)


def confirm_message(session: Session) -> ConfirmMsg:
    session._require(Role.INITIATOR, State.CONFIRMED)
    return ConfirmMsg(session.nonce, session.key.confirm_tag)


def accept_confirm(session: Session, msg: ConfirmMsg) -> KeyMaterial:
    """Responder: the initiator reported a matching tag."""
    session._require(Role.RESPONDER, State.RESPONDED)
    if msg.nonce != session.nonce:
        raise ProtocolError("confirmation for a different offer", "bad-nonce")
    if not hmac.compare_digest(msg.confirm_tag, session.key.confirm_tag):
        session.fail("initiator confirmed a different tag")
        raise HandshakeFailed("confirmation tag mismatch", "mismatch", session.diagnostic)
    session.state = State.CONFIRMED
    return session.key


def reject_message(session: Session, reason: str) -> RejectMsg:
    if session.state is not State.FAILED:
        session.fail(reason)
    return RejectMsg(session.nonce or "0" * (2 * NONCE_BYTES), reason)


def accept_reject(session: Session, msg: RejectMsg):
    session.fail(f"peer rejected: {msg.reason}")
    raise HandshakeFailed(f"peer rejected the handshake: {msg.reason}", "rejected", session.diagnostic)


# --- in-memory driver ---------------------------------------------------------------


@dataclass
class HandshakeOutcome:
    """Result of a local two-party run.  Exposes shared values for analysis only."""

    initiator: Session
    responder: Session
    resumes: int

    @property
    def keys_match(self) -> bool:
        a, b = self.initiator.key, self.responder.key
        return a is not None and b is not None and a.key == b.key

    @property
    def agreement(self) -> int:
        return agreement_digits(self.initiator.shared, self.responder.shared)


def handshake_in_memory(cfg_initiator: SessionConfig, cfg_responder: SessionConfig | None = None,
                        rng_initiator=None, rng_responder=None) -> HandshakeOutcome:
    """Run a full handshake between two local sessions, resumes included.

    Raises :class:`HandshakeFailed` when confirmation fails after all resumes.
    """
    cfg_responder = cfg_responder or cfg_initiator
    initiator, offer = create_offer(cfg_initiator, rng_initiator)
    resumes = 0
    while True:
        responder, reply = respond(cfg_responder, offer, rng_responder)
        result = finalize(initiator, reply, rng_initiator)
        if isinstance(result, KeyMaterial):
            accept_confirm(responder, confirm_message(initiator))
            return HandshakeOutcome(initiator, responder, resumes)
        resumes += 1
        offer = result.offer
