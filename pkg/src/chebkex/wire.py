"""Text envelopes for handshake messages, plus TCP and file transports.

An envelope is UTF-8 text::

    QRKE/1 OFFER
    attempt: 0
    nonce: 3f...
    suite: 9c...
    x: 5.000...e-1
    y: -2.718...e-1
    <blank line>

Keys are sorted, every number uses the canonical decimal grammar and is
padded to the suite's digit count, so an envelope's length depends only on
public parameters.
"""

from __future__ import annotations

import json
import logging
import os
import re
import socket
import socketserver
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import HandshakeFailed, ProtocolError, TransportError
from .protocol import (
    ConfirmMsg,
    KeyMaterial,
    OfferMsg,
    RejectMsg,
    RespondMsg,
    ResumeDecision,
    Role,
    Session,
    SessionConfig,
    State,
    accept_confirm,
    accept_reject,
    confirm_message,
    create_offer,
    finalize,
    reject_message,
    respond,
)
from .realfield import is_canonical, parse_canonical, to_decimal
from .rng import require_protocol_rng
from .strategy import Analytic, Casket, Combination

log = logging.getLogger(__name__)

VERSION = "QRKE/1"
MAX_MESSAGE = 1 << 20
DEFAULT_TIMEOUT = 30.0

_HEX32 = re.compile(r"[0-9a-f]{32}")
_UINT = re.compile(r"0|[1-9][0-9]{0,5}")
_REASON = re.compile(r"[\x20-\x7e]{1,200}")
_KEY = re.compile(r"[a-z_]+")

# message type -> {key: kind}
_SCHEMA = {
    "OFFER": {"attempt": "uint", "nonce": "hex", "suite": "hex", "x": "real", "y": "real"},
    "RESUME": {"attempt": "uint", "nonce": "hex", "suite": "hex", "x": "real", "y": "real"},
    "RESPOND": {"nonce": "hex", "tag": "hex", "y": "real"},
    "CONFIRM": {"nonce": "hex", "tag": "hex"},
    "REJECT": {"nonce": "hex", "reason": "text"},
}


class DecodeError(ProtocolError):
    """An envelope failed strict parsing; ``code`` names the rule it broke."""


def _fields(msg, digits: int) -> tuple[str, dict[str, str]]:
    if isinstance(msg, OfferMsg):
        kind = "RESUME" if msg.attempt else "OFFER"
        return kind, {
            "attempt": str(msg.attempt),
            "nonce": msg.nonce,
            "suite": msg.suite_id,
            "x": to_decimal(msg.x, digits),
            "y": to_decimal(msg.y, digits),
        }
    if isinstance(msg, RespondMsg):
        return "RESPOND", {"nonce": msg.nonce, "tag": msg.confirm_tag.hex(), "y": to_decimal(msg.y, digits)}
    if isinstance(msg, ConfirmMsg):
        return "CONFIRM", {"nonce": msg.nonce, "tag": msg.confirm_tag.hex()}
    if isinstance(msg, RejectMsg):
        return "REJECT", {"nonce": msg.nonce, "reason": msg.reason}
    raise TypeError(f"cannot encode {type(msg).__name__}")


def encode(msg, digits: int) -> bytes:
    """Deterministic envelope bytes; reals are written with exactly ``digits`` digits."""
    kind, fields = _fields(msg, digits)
    lines = [f"{VERSION} {kind}"]
    lines += [f"{k}: {fields[k]}" for k in sorted(fields)]
    return ("\n".join(lines) + "\n\n").encode("utf-8")


def _check_value(kind: str, key: str, value: str):
    if kind == "real":
        if not is_canonical(value):
            raise DecodeError(f"{key} is not a canonical number", "bad-number")
        return parse_canonical(value)
    ok = {
        "hex": _HEX32.fullmatch(value),
        "uint": _UINT.fullmatch(value),
        "text": _REASON.fullmatch(value),
    }[kind]
    if not ok:
        raise DecodeError(f"{key} has an invalid value", "bad-value")
    if kind == "uint":
        return int(value)
    return value


def decode(data: bytes):
    """Strictly parse one envelope.  Raises :class:`DecodeError` on any deviation."""
    if len(data) > MAX_MESSAGE:
        raise DecodeError("message exceeds 1 MiB", "oversize")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise DecodeError("message is not UTF-8", "malformed") from None
    if not text.endswith("\n\n") or "\r" in text:
        raise DecodeError("missing blank-line terminator", "malformed")
    lines = text[:-2].split("\n")
    head = lines[0].split(" ")
    if len(head) != 2 or head[0] != VERSION:
        raise DecodeError("unsupported protocol version", "bad-version")
    schema = _SCHEMA.get(head[1])
    if schema is None:
        raise DecodeError("unknown message type", "unknown-type")
    values = {}
    for line in lines[1:]:
        key, sep, value = line.partition(": ")
        if not sep or not _KEY.fullmatch(key):
            raise DecodeError("malformed field line", "malformed")
        if key in values:
            raise DecodeError(f"duplicate key {key}", "duplicate-key")
        if key not in schema:
            raise DecodeError(f"unknown key {key}", "unknown-key")
        values[key] = _check_value(schema[key], key, value)
    missing = set(schema) - set(values)
    if missing:
        raise DecodeError(f"missing keys: {', '.join(sorted(missing))}", "missing-key")
    kind = head[1]
    if kind in ("OFFER", "RESUME"):
        if (kind == "RESUME") != (values["attempt"] > 0):
            raise DecodeError("attempt counter does not match the message type", "bad-value")
        return OfferMsg(values["suite"], values["x"], values["y"], values["nonce"], values["attempt"])
    if kind == "RESPOND":
        return RespondMsg(values["nonce"], values["y"], bytes.fromhex(values["tag"]))
    if kind == "CONFIRM":
        return ConfirmMsg(values["nonce"], bytes.fromhex(values["tag"]))
    return RejectMsg(values["nonce"], values["reason"])


# --- stream framing -------------------------------------------------------------


class EnvelopeStream:
    """Blank-line framed envelopes over a connected socket."""

    def __init__(self, sock: socket.socket, digits: int, timeout: float = DEFAULT_TIMEOUT):
        sock.settimeout(timeout)
        self.sock = sock
        self.digits = digits
        self._reader = sock.makefile("rb")

    def send(self, msg):
        try:
            self.sock.sendall(encode(msg, self.digits))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv(self):
        buf = bytearray()
        try:
            while True:
                line = self._reader.readline(MAX_MESSAGE + 1 - len(buf))
                if not line:
                    raise TransportError("connection closed mid-handshake")
                buf += line
                if line == b"\n" and len(buf) > 1:
                    break
                if len(buf) > MAX_MESSAGE:
                    raise DecodeError("message exceeds 1 MiB", "oversize")
        except (socket.timeout, TimeoutError) as exc:
            raise TransportError("timed out waiting for the peer") from exc
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        return decode(bytes(buf))

    def close(self):
        self._reader.close()


def _send_reject(stream: EnvelopeStream, session: Session | None, reason: str):
    try:
        if session is not None:
            stream.send(reject_message(session, reason))
    except TransportError:
        pass


def initiator_exchange(stream: EnvelopeStream, cfg: SessionConfig, rng=None) -> KeyMaterial:
    rng = require_protocol_rng(rng)
    session, offer = create_offer(cfg, rng)
    stream.send(offer)
    while True:
        reply = stream.recv()
        if isinstance(reply, RejectMsg):
            accept_reject(session, reply)
        if not isinstance(reply, RespondMsg):
            _send_reject(stream, session, "expected RESPOND")
            raise ProtocolError("expected RESPOND", "out-of-order")
        try:
            result = finalize(session, reply, rng)
        except HandshakeFailed as exc:
            _send_reject(stream, session, f"confirmation failed ({exc.code})")
            raise
        except ProtocolError as exc:
            _send_reject(stream, session, exc.code)
            raise
        if isinstance(result, KeyMaterial):
            stream.send(confirm_message(session))
            return result
        stream.send(result.offer)


def responder_exchange(stream: EnvelopeStream, cfg: SessionConfig, rng=None) -> KeyMaterial:
    rng = require_protocol_rng(rng)
    session = None
    expected_attempt = 0
    while True:
        msg = stream.recv()
        if isinstance(msg, RejectMsg):
            if session is None:
                raise HandshakeFailed(f"peer rejected the handshake: {msg.reason}", "rejected")
            accept_reject(session, msg)
        if isinstance(msg, ConfirmMsg) and session is not None:
            return accept_confirm(session, msg)
        if not isinstance(msg, OfferMsg) or msg.attempt != expected_attempt:
            stub = session or Session(Role.RESPONDER, cfg)
            _send_reject(stream, stub, "out-of-order")
            raise ProtocolError("unexpected message", "out-of-order")
        try:
            session, reply = respond(cfg, msg, rng)
        except ProtocolError as exc:
            stub = Session(Role.RESPONDER, cfg, nonce=msg.nonce)
            _send_reject(stream, stub, exc.code)
            raise
        stream.send(reply)
        expected_attempt += 1


def run_initiator(host: str, port: int, cfg: SessionConfig, rng=None,
                  timeout: float = DEFAULT_TIMEOUT) -> KeyMaterial:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
    with sock:
        stream = EnvelopeStream(sock, cfg.ctx.digits, timeout)
        try:
            return initiator_exchange(stream, cfg, rng)
        finally:
            stream.close()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: ResponderServer = self.server
        stream = EnvelopeStream(self.connection, server.cfg.ctx.digits, server.timeout)
        rng = server.rng_factory()
        try:
            key = responder_exchange(stream, server.cfg, rng)
        except (ProtocolError, TransportError) as exc:
            log.info("session from %s failed: %s", self.client_address[0], exc)
            server.record(None, exc)
        else:
            log.info("session from %s confirmed, fingerprint %s", self.client_address[0], key.fingerprint)
            server.record(key, None)
        finally:
            stream.close()


class ResponderServer(socketserver.ThreadingTCPServer):
    """Accepts concurrent connections; each runs an independent responder session.

    ``on_result(key, error)`` is called from the connection's thread.
    """

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, cfg: SessionConfig, rng_factory=None, on_result=None,
                 timeout: float = DEFAULT_TIMEOUT):
        super().__init__(address, _Handler)
        self.cfg = cfg
        self.rng_factory = rng_factory or (lambda: None)
        self.timeout = timeout
        self.on_result = on_result

    def record(self, key, error):
        if self.on_result is not None:
            self.on_result(key, error)


def run_responder(host: str, port: int, cfg: SessionConfig, rng=None,
                  timeout: float = DEFAULT_TIMEOUT, ready: threading.Event | None = None) -> KeyMaterial:
    """Accept exactly one connection and run the responder side on it."""
    try:
        listener = socket.create_server((host, port))
    except OSError as exc:
        raise TransportError(f"cannot listen on {host}:{port}: {exc}") from exc
    with listener:
        listener.settimeout(timeout)
        if ready is not None:
            ready.port = listener.getsockname()[1]
            ready.set()
        try:
            conn, _ = listener.accept()
        except (socket.timeout, TimeoutError) as exc:
            raise TransportError("no initiator connected before the timeout") from exc
    with conn:
        stream = EnvelopeStream(conn, cfg.ctx.digits, timeout)
        try:
            return responder_exchange(stream, cfg, rng)
        finally:
            stream.close()


# --- offline file mode -------------------------------------------------------------


def write_private(path: Path, data: bytes):
    """Create ``path`` readable by the owner only."""
    path = Path(path)
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.chmod(path, 0o600)


def _secret_to_json(sel) -> dict:
    if isinstance(sel, Combination):
        return {"variant": "combination", "primes": list(sel.primes), "reps": list(sel.reps)}
    if isinstance(sel, Casket):
        return {"variant": "casket", "indices": list(sel.indices)}
    return {"variant": "analytic", "n": str(sel.n)}


def _secret_from_json(obj: dict):
    variant = obj.get("variant")
    if variant == "combination":
        return Combination(tuple(obj["primes"]), tuple(obj["reps"]))
    if variant == "casket":
        return Casket(tuple(obj["indices"]))
    if variant == "analytic":
        return Analytic(int(obj["n"]))
    raise ProtocolError("unreadable state file", "bad-state")


@dataclass
class OfflineInitiator:
    """Initiator state persisted between ``offer`` and ``finalize`` invocations.

    The state file holds the secret selection, so it is written mode 0600.
    """

    session: Session

    def dump(self, path: Path):
        s = self.session
        digits = s.config.ctx.digits
        payload = {
            "suite": s.config.suite.suite_id,
            "nonce": s.nonce,
            "attempt": s.resume_count,
            "x": to_decimal(s.x, digits),
            "y": to_decimal(s.my_value, digits),
            "secret": _secret_to_json(s.my_secret),
        }
        write_private(path, json.dumps(payload, sort_keys=True).encode())

    @classmethod
    def load(cls, path: Path, cfg: SessionConfig) -> OfflineInitiator:
        try:
            payload = json.loads(Path(path).read_text())
            if payload["suite"] != cfg.suite.suite_id:
                raise ProtocolError("state file belongs to a different suite", "unknown-suite")
            session = Session(
                Role.INITIATOR,
                cfg,
                state=State.OFFER_SENT,
                x=parse_canonical(payload["x"]),
                my_value=parse_canonical(payload["y"]),
                nonce=payload["nonce"],
                resume_count=int(payload["attempt"]),
                my_secret=_secret_from_json(payload["secret"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"unreadable state file: {type(exc).__name__}", "bad-state") from None
        return cls(session)


def read_envelope(path: Path):
    data = Path(path).read_bytes()
    return decode(data)


def write_envelope(path: Path, msg, digits: int):
    Path(path).write_bytes(encode(msg, digits))


def offline_offer(cfg: SessionConfig, out: Path, state: Path, rng=None) -> OfferMsg:
    session, offer = create_offer(cfg, rng)
    write_envelope(out, offer, cfg.ctx.digits)
    OfflineInitiator(session).dump(state)
    return offer


def offline_respond(cfg: SessionConfig, inp: Path, out: Path, rng=None) -> KeyMaterial:
    """Answer an OFFER/RESUME file.  The key is provisional until the initiator confirms."""
    offer = read_envelope(inp)
    if not isinstance(offer, OfferMsg):
        raise ProtocolError("expected an OFFER or RESUME envelope", "out-of-order")
    session, reply = respond(cfg, offer, rng)
    write_envelope(out, reply, cfg.ctx.digits)
    return session.key


def offline_finalize(cfg: SessionConfig, inp: Path, state: Path, out: Path | None = None,
                     rng=None) -> KeyMaterial | ResumeDecision:
    """Finish from a RESPOND file.

    On success writes CONFIRM to ``out``; on a mismatch with resumes left,
    writes the RESUME envelope to ``out`` and updates the state file.
    """
    initiator = OfflineInitiator.load(state, cfg)
    reply = read_envelope(inp)
    if not isinstance(reply, RespondMsg):
        raise ProtocolError("expected a RESPOND envelope", "out-of-order")
    result = finalize(initiator.session, reply, rng)
    if isinstance(result, KeyMaterial):
        if out is not None:
            write_envelope(out, confirm_message(initiator.session), cfg.ctx.digits)
        Path(state).unlink(missing_ok=True)
        return result
    if out is not None:
        write_envelope(out, result.offer, cfg.ctx.digits)
    initiator.dump(state)
    return result
