"""Control layer: P-CSCF/S-CSCF routing, the AKA-challenged registrar,
and a minimal session state machine.

Auth header grammars (invented, bit-exact):

    WWW-Authenticate: AKA impi="<impi>", nonce="<base64(rand||autn)>"
    Authorization:    AKA impi="<impi>", nonce="<...>", response="<hex RES>"

The nonce decodes to exactly 32 bytes (16-byte RAND || 16-byte AUTN).
A nonce is single-use: it is discarded on the first Authorization that
references it, whatever the outcome.  A wrong RES is terminal (403, no
re-challenge).  Granted Expires = min(requested, 3600), default 3600.

The P-CSCF and S-CSCF are two netsim nodes in one process.  Requests
gain one Via per hop; responses travel back along the reversed Via
path.  The S-CSCF caches its responses per request payload so that
retransmitted requests are answered identically instead of being
re-processed (which would burn single-use nonces).
"""

from __future__ import annotations

import base64
import dataclasses
import hashlib
import re

from . import aka, sip
from .hss import HssStore, StaleCseq, UnknownIdentity
from .netsim import LinkConfig, Network
from .rng import SplitMix64

CHALLENGE_TTL_MS = 60_000
MAX_EXPIRES_S = 3600


@dataclasses.dataclass
class Challenge:
    nonce: str
    impi: str
    vector: aka.AuthVector
    issued_at: int


@dataclasses.dataclass
class SessionRecord:
    call_id: str
    from_impu: sip.SipUri
    to_target: sip.SipUri
    state: str  # proceeding | confirmed | terminated


_AUTH_PARAM_RE = re.compile(r'(\w+)="([^"]*)"')


def parse_auth_params(value: str, scheme: str = "AKA") -> dict[str, str] | None:
    if not value.startswith(scheme + " "):
        return None
    return dict(_AUTH_PARAM_RE.findall(value[len(scheme) + 1 :]))


def via_node(via_value: str) -> str:
    """Node id out of a `SIP/2.0/SIM <node>;params` Via value."""
    rest = via_value.split(" ", 1)[1] if " " in via_value else ""
    return rest.split(";", 1)[0]


def _uri_in_angle(header_value: str) -> sip.SipUri:
    m = re.search(r"<([^>]+)>", header_value)
    text = m.group(1) if m else header_value.split(";")[0].strip()
    return sip.parse_uri(text)


class ImsCore:
    """One simulated IMS core: registrar, session control, routing."""

    def __init__(
        self,
        hss: HssStore,
        rng: SplitMix64,
        domain: str = "ims.kau.example",
        pcscf: str = "pcscf",
        scscf: str = "scscf",
    ):
        self.hss = hss
        self.rng = rng
        self.domain = domain
        self.pcscf = pcscf
        self.scscf = scscf
        self.challenges: dict[str, Challenge] = {}
        self.sessions: dict[str, SessionRecord] = {}
        self._response_cache: dict[str, list[bytes]] = {}
        self.net: Network | None = None

    # --- wiring -----------------------------------------------------------

    def attach(self, net: Network, internal_delay_ms: int = 1) -> None:
        self.net = net
        net.add_node(self.pcscf, self._pcscf_handler)
        net.add_node(self.scscf, self._scscf_handler)
        net.connect(self.pcscf, self.scscf,
                    LinkConfig(delay_ms=internal_delay_ms, loss_prob=0.0, seed=0))

    # --- routing ----------------------------------------------------------

    def route_request(self, msg: sip.SipMessage, node: str) -> sip.SipMessage:
        """One proxy hop: prepend this node's Via.  The branch is a hash
        of the incoming message, so a retransmission is annotated
        identically and downstream response caching recognizes it."""
        digest = hashlib.sha256(sip.serialize_message(msg)).hexdigest()[:12]
        return msg.push_via(f"SIP/2.0/SIM {node};branch=z9hG4bK-{digest}")

    def route_response(self, msg: sip.SipMessage, node: str) -> tuple[sip.SipMessage, str]:
        """Pop this node's Via; returns (message, next-hop node id)."""
        vias = msg.header_values("Via")
        if not vias or via_node(vias[0]) != node:
            raise sip.InvalidMessage(f"response not routed via {node}")
        popped = msg.pop_via()
        nxt = popped.header_values("Via")
        if not nxt:
            raise sip.InvalidMessage("response has no next hop")
        return popped, via_node(nxt[0])

    def _pcscf_handler(self, net: Network, at: int, src: str, payload: bytes) -> None:
        try:
            msg = sip.parse_message(payload)
        except sip.ParseError:
            return  # unroutable garbage is dropped at the edge
        if msg.kind == "request":
            out = self.route_request(msg, self.pcscf)
            net.send(self.pcscf, self.scscf, sip.serialize_message(out), at)
        else:
            try:
                out, nxt = self.route_response(msg, self.pcscf)
            except sip.InvalidMessage:
                return
            net.send(self.pcscf, nxt, sip.serialize_message(out), at)

    def _scscf_handler(self, net: Network, at: int, src: str, payload: bytes) -> None:
        try:
            msg = sip.parse_message(payload)
        except sip.ParseError:
            return
        if msg.kind == "response":
            return  # terminal hop: no downstream to forward responses to
        cache_key = hashlib.sha256(payload).hexdigest()
        if cache_key in self._response_cache:
            outs = self._response_cache[cache_key]
        else:
            annotated = self.route_request(msg, self.scscf)
            responses = self.dispatch(annotated, at)
            outs = []
            for resp in responses:
                routed, _ = self.route_response(resp, self.scscf)
                outs.append(sip.serialize_message(routed))
            self._response_cache[cache_key] = outs
        for raw in outs:
            try:
                nxt = via_node(sip.parse_message(raw).header_values("Via")[0])
            except sip.ParseError:
                continue
            net.send(self.scscf, nxt, raw, at)

    # --- registrar/session dispatch ----------------------------------------

    def dispatch(self, msg: sip.SipMessage, now: int) -> list[sip.SipMessage]:
        if msg.method == "REGISTER":
            return self.on_register(msg, now)
        if msg.method == "INVITE":
            return self.on_invite(msg)
        if msg.method == "ACK":
            return self.on_ack(msg)
        if msg.method == "BYE":
            return self.on_bye(msg)
        if msg.method == "MESSAGE":
            if self._sender_registered(msg):
                return [sip.make_response(msg, 200, "OK")]
            return [sip.make_response(msg, 403, "Forbidden")]
        return [sip.make_response(msg, 400, "Bad Request")]

    def on_register(self, msg: sip.SipMessage, now: int) -> list[sip.SipMessage]:
        if msg.kind != "request" or msg.method != "REGISTER":
            raise sip.InvalidMessage("on_register needs a REGISTER request")

        auth_value = msg.header("Authorization")
        params = parse_auth_params(auth_value) if auth_value else None
        if auth_value is not None and params is None:
            return [sip.make_response(msg, 400, "Bad Request")]

        try:
            from_uri = _uri_in_angle(msg.header("From") or "")
            to_impu = _uri_in_angle(msg.header("To") or "")
        except sip.ParseError:
            return [sip.make_response(msg, 400, "Bad Request")]

        if params is not None and "impi" in params:
            impi = params["impi"]
        else:
            impi = f"{from_uri.user}@{from_uri.host}" if from_uri.user else from_uri.host

        try:
            sub = self.hss.lookup_by_impi(impi)
        except UnknownIdentity:
            return [sip.make_response(msg, 403, "Forbidden")]

        if params is None:
            sqn = self.hss.advance_sqn(impi)
            rand = self.rng.next_bytes(16)
            vector = aka.generate_vector(sub.k, sqn, rand)
            nonce = base64.b64encode(rand + vector.autn).decode("ascii")
            self.challenges[nonce] = Challenge(nonce, impi, vector, now)
            resp = sip.make_response(msg, 401, "Unauthorized")
            return [resp.replace_header(
                "WWW-Authenticate", f'AKA impi="{impi}", nonce="{nonce}"')]

        nonce = params.get("nonce", "")
        challenge = self.challenges.pop(nonce, None)  # single-use, any outcome
        if challenge is None or challenge.impi != impi:
            return [sip.make_response(msg, 403, "Forbidden")]
        try:
            res = bytes.fromhex(params.get("response", ""))
        except ValueError:
            return [sip.make_response(msg, 400, "Bad Request")]
        if len(res) != aka.RES_LEN or not aka.verify_response(challenge.vector.xres, res):
            return [sip.make_response(msg, 403, "Forbidden")]

        if to_impu.render() not in {u.render() for u in sub.impus}:
            return [sip.make_response(msg, 403, "Forbidden")]

        requested = msg.header("Expires")
        try:
            expires = MAX_EXPIRES_S if requested is None else int(requested)
        except ValueError:
            return [sip.make_response(msg, 400, "Bad Request")]
        expires = min(expires, MAX_EXPIRES_S)

        contact_value = msg.header("Contact")
        contact = None
        if contact_value is not None:
            try:
                contact = _uri_in_angle(contact_value)
            except sip.ParseError:
                return [sip.make_response(msg, 400, "Bad Request")]

        cseq_number = int((msg.header("CSeq") or "0 REGISTER").split()[0])
        call_id = msg.header("Call-ID") or ""
        if expires <= 0:
            self.hss.unbind(to_impu, contact)
            resp = sip.make_response(msg, 200, "OK")
            return [resp.replace_header("Expires", "0")]
        if contact is None:
            return [sip.make_response(msg, 400, "Bad Request")]
        try:
            self.hss.bind(to_impu, contact, now + expires * 1000, call_id, cseq_number)
        except StaleCseq:
            return [sip.make_response(msg, 400, "Bad Request")]
        resp = sip.make_response(msg, 200, "OK")
        resp = resp.replace_header("Contact", f"<{contact.render()}>")
        return [resp.replace_header("Expires", str(expires))]

    def _sender_registered(self, msg: sip.SipMessage) -> bool:
        try:
            from_impu = _uri_in_angle(msg.header("From") or "")
        except sip.ParseError:
            return False
        return bool(self.hss.bindings(from_impu))

    def on_invite(self, msg: sip.SipMessage) -> list[sip.SipMessage]:
        if not self._sender_registered(msg):
            return [sip.make_response(msg, 403, "Forbidden")]
        call_id = msg.header("Call-ID") or ""
        existing = self.sessions.get(call_id)
        if existing is not None and existing.state != "terminated":
            return [sip.make_response(msg, 400, "Bad Request")]
        try:
            from_impu = _uri_in_angle(msg.header("From") or "")
            to_target = _uri_in_angle(msg.header("To") or "")
        except sip.ParseError:
            return [sip.make_response(msg, 400, "Bad Request")]
        self.sessions[call_id] = SessionRecord(
            call_id=call_id, from_impu=from_impu, to_target=to_target,
            state="proceeding",
        )
        return [sip.make_response(msg, 200, "OK")]

    def on_ack(self, msg: sip.SipMessage) -> list[sip.SipMessage]:
        call_id = msg.header("Call-ID") or ""
        session = self.sessions.get(call_id)
        if session is None or session.state == "terminated":
            return [sip.make_response(msg, 481, "Call/Transaction Does Not Exist")]
        if session.state == "proceeding":
            session.state = "confirmed"
        return []

    def on_bye(self, msg: sip.SipMessage) -> list[sip.SipMessage]:
        call_id = msg.header("Call-ID") or ""
        session = self.sessions.get(call_id)
        if session is None or session.state == "terminated":
            return [sip.make_response(msg, 481, "Call/Transaction Does Not Exist")]
        session.state = "terminated"
        return [sip.make_response(msg, 200, "OK")]

    # --- housekeeping -----------------------------------------------------

    def tick(self, now: int) -> None:
        stale = [
            nonce for nonce, ch in self.challenges.items()
            if now - ch.issued_at > CHALLENGE_TTL_MS
        ]
        for nonce in stale:
            del self.challenges[nonce]
        self.hss.purge_expired(now)
