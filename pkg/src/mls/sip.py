"""SIP message codec: a small, strict subset sufficient for registration
and simple sessions.

Deliberate deviations from full RFC 3261, documented here:
  * methods limited to REGISTER, INVITE, ACK, BYE, MESSAGE
  * no folded/continuation header lines, one header per line
  * headers must be ASCII (bodies may be arbitrary bytes)
  * Content-Length is derived state: the parser checks it against the
    body and drops it from the header list; the serializer always emits
    a recomputed Content-Length as the final header
  * response To-tags are derived deterministically from the Call-ID so
    simulation traces replay byte-exactly
"""

from __future__ import annotations

import dataclasses
import hashlib
import hmac

METHODS = ("REGISTER", "INVITE", "ACK", "BYE", "MESSAGE")
REQUIRED_HEADERS = ("Via", "From", "To", "Call-ID", "CSeq")

# Key for the deterministic To-tag derivation; not a secret, just a
# domain separator so tags can be recomputed by an independent check.
_TAG_KEY = b"mls-to-tag"

_TOKEN_CHARS = set(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    "-._!%*+`'~"
)


class SipError(Exception):
    pass


class ParseError(SipError):
    """Raised for any malformed input; parsing is total, this is the
    only exception parse_message may raise."""

    def __init__(self, reason: str, line: int = 0, offset: int = 0):
        super().__init__(f"line {line}, offset {offset}: {reason}")
        self.reason = reason
        self.line = line
        self.offset = offset


class InvalidMessage(SipError):
    """Raised when serializing a message that violates its invariants."""


@dataclasses.dataclass(frozen=True)
class SipUri:
    """sip: URI — carrier for IMPI/IMPU identities."""

    host: str
    user: str | None = None
    port: int | None = None
    params: tuple[tuple[str, str | None], ...] = ()

    def render(self) -> str:
        out = "sip:"
        if self.user is not None:
            out += f"{self.user}@"
        out += self.host
        if self.port is not None:
            out += f":{self.port}"
        for name, value in self.params:
            out += f";{name}" if value is None else f";{name}={value}"
        return out

    def __str__(self) -> str:
        return self.render()


def parse_uri(text: str) -> SipUri:
    if not text.startswith("sip:"):
        raise ParseError("uri scheme must be sip")
    rest = text[4:]
    main, _, param_str = rest.partition(";")
    user: str | None = None
    if "@" in main:
        user, _, main = main.partition("@")
        if not user or not set(user) <= _TOKEN_CHARS:
            raise ParseError("bad uri user")
    host = main
    port: int | None = None
    if ":" in main:
        host, _, port_str = main.partition(":")
        if not port_str.isdigit():
            raise ParseError("bad uri port")
        port = int(port_str)
        if not 1 <= port <= 65535:
            raise ParseError("uri port out of range")
    if not host or not set(host) <= _TOKEN_CHARS:
        raise ParseError("bad uri host")
    params: list[tuple[str, str | None]] = []
    if param_str:
        for piece in param_str.split(";"):
            if not piece:
                raise ParseError("empty uri parameter")
            name, eq, value = piece.partition("=")
            if not name or not set(name) <= _TOKEN_CHARS:
                raise ParseError("bad uri parameter name")
            params.append((name, value if eq else None))
    return SipUri(host=host, user=user, port=port, params=tuple(params))


@dataclasses.dataclass(frozen=True)
class SipMessage:
    """Parsed SIP request or response with ordered headers.

    Content-Length never appears in `headers`; it is recomputed from
    `body` at serialization time.
    """

    kind: str  # "request" | "response"
    headers: tuple[tuple[str, str], ...]
    body: bytes = b""
    method: str | None = None
    request_uri: SipUri | None = None
    status: int | None = None
    reason: str | None = None

    def header(self, name: str) -> str | None:
        lower = name.lower()
        for key, value in self.headers:
            if key.lower() == lower:
                return value
        return None

    def header_values(self, name: str) -> list[str]:
        lower = name.lower()
        return [v for k, v in self.headers if k.lower() == lower]

    def replace_header(self, name: str, value: str) -> "SipMessage":
        lower = name.lower()
        done = False
        new: list[tuple[str, str]] = []
        for k, v in self.headers:
            if k.lower() == lower and not done:
                new.append((k, value))
                done = True
            else:
                new.append((k, v))
        if not done:
            new.append((name, value))
        return dataclasses.replace(self, headers=tuple(new))

    def without_header(self, name: str) -> "SipMessage":
        lower = name.lower()
        new = tuple((k, v) for k, v in self.headers if k.lower() != lower)
        return dataclasses.replace(self, headers=new)

    def push_via(self, value: str) -> "SipMessage":
        return dataclasses.replace(self, headers=(("Via", value),) + self.headers)

    def pop_via(self) -> "SipMessage":
        for i, (k, _) in enumerate(self.headers):
            if k.lower() == "via":
                return dataclasses.replace(
                    self, headers=self.headers[:i] + self.headers[i + 1 :]
                )
        raise InvalidMessage("no Via to pop")


def request(
    method: str,
    uri: SipUri,
    headers: list[tuple[str, str]],
    body: bytes = b"",
) -> SipMessage:
    return SipMessage(
        kind="request",
        method=method,
        request_uri=uri,
        headers=tuple(headers),
        body=body,
    )


def response(
    status: int,
    reason: str,
    headers: list[tuple[str, str]],
    body: bytes = b"",
) -> SipMessage:
    return SipMessage(
        kind="response",
        status=status,
        reason=reason,
        headers=tuple(headers),
        body=body,
    )


def _check_invariants(msg: SipMessage) -> None:
    for name in REQUIRED_HEADERS:
        if msg.header(name) is None:
            raise InvalidMessage(f"missing required header {name}")
    cseq = msg.header("CSeq") or ""
    parts = cseq.split()
    if len(parts) != 2 or not parts[0].isdigit() or parts[1] not in METHODS:
        raise InvalidMessage("bad CSeq")
    if msg.kind == "request":
        if msg.method not in METHODS:
            raise InvalidMessage("unsupported method")
        if msg.request_uri is None:
            raise InvalidMessage("request without request_uri")
        if parts[1] != msg.method:
            raise InvalidMessage("CSeq method mismatch")
    elif msg.kind == "response":
        if msg.status is None or not 100 <= msg.status <= 699:
            raise InvalidMessage("status out of range")
    else:
        raise InvalidMessage("kind must be request or response")


def parse_message(raw: bytes) -> SipMessage:
    head_bytes, sep, body = raw.partition(b"\r\n\r\n")
    if not sep:
        raise ParseError("missing blank line terminating headers")
    try:
        head = head_bytes.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError("non-ASCII byte in headers", offset=exc.start) from None
    lines = head.split("\r\n")
    start = lines[0]

    if start.startswith("SIP/2.0 "):
        rest = start[len("SIP/2.0 ") :]
        code_str, _, reason = rest.partition(" ")
        if len(code_str) != 3 or not code_str.isdigit():
            raise ParseError("malformed status line", line=1)
        status = int(code_str)
        if not 100 <= status <= 699:
            raise ParseError("status code out of range", line=1)
        kind, method, uri = "response", None, None
    else:
        parts = start.split(" ")
        if len(parts) != 3 or parts[2] != "SIP/2.0":
            raise ParseError("malformed start line", line=1)
        method, uri_text = parts[0], parts[1]
        if method not in METHODS:
            raise ParseError(f"unsupported method {method!r}", line=1)
        try:
            uri = parse_uri(uri_text)
        except ParseError as exc:
            raise ParseError(exc.reason, line=1) from None
        kind, status, reason = "request", None, None

    headers: list[tuple[str, str]] = []
    content_length: int | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        name, colon, value = line.partition(":")
        name = name.strip()
        if not colon or not name or not set(name) <= _TOKEN_CHARS:
            raise ParseError("bad header syntax", line=lineno)
        value = value.strip()
        if name.lower() == "content-length":
            if not value.isdigit():
                raise ParseError("bad Content-Length value", line=lineno)
            content_length = int(value)
            continue
        headers.append((name, value))

    if content_length is not None and content_length != len(body):
        raise ParseError(
            f"Content-Length {content_length} != body length {len(body)}"
        )

    msg = SipMessage(
        kind=kind,
        method=method,
        request_uri=uri,
        status=status,
        reason=reason,
        headers=tuple(headers),
        body=body,
    )
    try:
        _check_invariants(msg)
    except InvalidMessage as exc:
        raise ParseError(str(exc)) from None
    return msg


def serialize_message(msg: SipMessage) -> bytes:
    _check_invariants(msg)
    if msg.kind == "request":
        start = f"{msg.method} {msg.request_uri.render()} SIP/2.0"
    else:
        start = f"SIP/2.0 {msg.status} {msg.reason or ''}".rstrip()
    lines = [start]
    for name, value in msg.headers:
        if name.lower() == "content-length":
            continue
        lines.append(f"{name}: {value}")
    lines.append(f"Content-Length: {len(msg.body)}")
    text = "\r\n".join(lines) + "\r\n\r\n"
    try:
        out = text.encode("ascii")
    except UnicodeDecodeError:
        raise InvalidMessage("non-ASCII content in headers") from None
    return out + msg.body


def derive_tag(call_id: str) -> str:
    """Deterministic To-tag: first 8 hex chars of
    HMAC-SHA-256(key=b"mls-to-tag", msg=Call-ID)."""
    digest = hmac.new(_TAG_KEY, call_id.encode("ascii"), hashlib.sha256)
    return digest.hexdigest()[:8]


def make_response(req: SipMessage, status: int, reason: str) -> SipMessage:
    """Response skeleton copying Via/From/To/Call-ID/CSeq from the request.

    Final responses (status >= 200) gain a To-tag derived from the
    Call-ID, unless the request's To already carried one.
    """
    if req.kind != "request":
        raise InvalidMessage("can only respond to a request")
    headers: list[tuple[str, str]] = []
    for via in req.header_values("Via"):
        headers.append(("Via", via))
    to_value = req.header("To") or ""
    call_id = req.header("Call-ID") or ""
    if status >= 200 and ";tag=" not in to_value:
        to_value = f"{to_value};tag={derive_tag(call_id)}"
    headers.append(("From", req.header("From") or ""))
    headers.append(("To", to_value))
    headers.append(("Call-ID", call_id))
    headers.append(("CSeq", req.header("CSeq") or ""))
    return response(status, reason, headers)


# --- test-support generator -------------------------------------------------

_WORDS = ("alice", "bob", "carol", "dave", "erin", "frank", "s1001", "s2002")
_HOSTS = ("ims.kau.example", "example.com", "node-7.test", "kau.edu.example")
_EXTRA_HEADERS = ("Contact", "User-Agent", "Expires", "Subject", "X-Trace")


def random_message(rng) -> SipMessage:
    """Structurally valid random message for round-trip property tests.

    `rng` is a SplitMix64-style object exposing next_below/next_bytes.
    """

    def pick(seq):
        return seq[rng.next_below(len(seq))]

    method = pick(METHODS)
    uri = SipUri(
        host=pick(_HOSTS),
        user=pick(_WORDS) if rng.next_below(2) else None,
        port=1000 + rng.next_below(60000) if rng.next_below(3) == 0 else None,
        params=(("transport", "sim"),) if rng.next_below(4) == 0 else (),
    )
    call_id = f"cid-{rng.next_below(10**9)}"
    cseq = 1 + rng.next_below(1000)
    headers: list[tuple[str, str]] = [
        ("Via", f"SIP/2.0/SIM {pick(_HOSTS)};branch=z9hG4bK{rng.next_below(10**6)}"),
        ("From", f"<sip:{pick(_WORDS)}@{pick(_HOSTS)}>;tag={rng.next_below(10**6)}"),
        ("To", f"<sip:{pick(_WORDS)}@{pick(_HOSTS)}>"),
        ("Call-ID", call_id),
        ("CSeq", f"{cseq} {method}"),
    ]
    for _ in range(rng.next_below(4)):
        headers.append((pick(_EXTRA_HEADERS), f"v{rng.next_below(10**6)}"))
    body = rng.next_bytes(rng.next_below(40)) if rng.next_below(3) == 0 else b""
    if rng.next_below(2):
        return request(method, uri, headers, body)
    status = 100 + rng.next_below(600)
    return response(status, pick(("OK", "Trying", "Unauthorized", "Forbidden")),
                    headers, body)
