"""UE agent: a simulated handset that registers with the core over the
simulated network and drives simple sessions.

One agent owns one netsim node.  Registration is the two-step AKA flow:
an unauthenticated REGISTER draws a 401 challenge, the agent answers it
with the RES computed from its key, and a 200 confirms the binding.
"""

from __future__ import annotations

import base64
import dataclasses

from . import aka, sip
from .core import parse_auth_params
from .netsim import ClientTransaction, Network


@dataclasses.dataclass
class FlowResult:
    status: int | None  # final SIP status, None on timeout
    attempts: int  # retransmissions across the flow's transactions
    responses: list[sip.SipMessage]

    @property
    def ok(self) -> bool:
        return self.status is not None and 200 <= self.status < 300


class UeAgent:
    def __init__(
        self,
        net: Network,
        node: str,
        impi: str,
        impu: sip.SipUri,
        k: bytes,
        entry: str = "pcscf",
        domain: str = "ims.kau.example",
    ):
        self.net = net
        self.node = node
        self.impi = impi
        self.impu = impu
        self.k = k
        self.entry = entry
        self.domain = domain
        self.last_sqn = 0
        self._counter = 0
        self._reg_call_id = f"reg-{node}"
        self._reg_cseq = 0
        net.add_node(node, self._on_message)

    def _on_message(self, net: Network, at: int, src: str, payload: bytes) -> None:
        # Responses are matched by pending transactions; anything else
        # (duplicate responses after completion) is ignored.
        return

    def _headers(
        self, method: str, call_id: str, cseq: int, to_uri: sip.SipUri,
        contact: bool = True,
    ) -> list[tuple[str, str]]:
        self._counter += 1
        headers = [
            ("Via", f"SIP/2.0/SIM {self.node};branch=z9hG4bK-{self.node}-{self._counter}"),
            ("From", f"<{self.impu.render()}>;tag={self.node}-{self._counter}"),
            ("To", f"<{to_uri.render()}>"),
            ("Call-ID", call_id),
            ("CSeq", f"{cseq} {method}"),
        ]
        if contact:
            headers.append(("Contact", f"<sip:{self.node}@{self.domain}>"))
        return headers

    def _run(self, req: sip.SipMessage) -> ClientTransaction:
        txn = ClientTransaction(request=req)
        self.net.send_reliable(txn, self.node, self.entry, at=self.net.now)
        self.net.run_until_idle()
        return txn

    # --- registration -------------------------------------------------------

    def register(self, expires: int = 3600) -> FlowResult:
        self._reg_cseq += 1
        req = sip.request(
            "REGISTER",
            sip.SipUri(host=self.domain),
            self._headers("REGISTER", self._reg_call_id, self._reg_cseq, self.impu)
            + [("Expires", str(expires))],
        )
        txn1 = self._run(req)
        if txn1.state != "completed":
            return FlowResult(None, txn1.attempts, [])
        resp1 = txn1.response
        assert resp1 is not None
        if resp1.status != 401:
            return FlowResult(resp1.status, txn1.attempts, [resp1])

        www = resp1.header("WWW-Authenticate") or ""
        params = parse_auth_params(www) or {}
        try:
            blob = base64.b64decode(params.get("nonce", ""))
        except ValueError:
            blob = b""
        if len(blob) != 32:
            return FlowResult(resp1.status, txn1.attempts, [resp1])
        rand, autn = blob[:16], blob[16:32]
        try:
            answer_res = aka.ue_respond(self.k, rand, autn, self.last_sqn).res
            self.last_sqn = aka.extract_sqn(self.k, rand, autn)
        except aka.AuthFailure:
            # Network token does not verify under our key.  Answer anyway
            # with the RES our key produces: the core rejects it with a
            # definitive 403 instead of leaving the flow hanging.
            answer_res = aka.compute_res(self.k, rand)

        self._reg_cseq += 1
        auth = (
            f'AKA impi="{self.impi}", nonce="{params.get("nonce", "")}", '
            f'response="{answer_res.hex()}"'
        )
        req2 = sip.request(
            "REGISTER",
            sip.SipUri(host=self.domain),
            self._headers("REGISTER", self._reg_call_id, self._reg_cseq, self.impu)
            + [("Expires", str(expires)), ("Authorization", auth)],
        )
        txn2 = self._run(req2)
        if txn2.state != "completed":
            return FlowResult(None, txn1.attempts + txn2.attempts, [resp1])
        resp2 = txn2.response
        assert resp2 is not None
        return FlowResult(resp2.status, txn1.attempts + txn2.attempts, [resp1, resp2])

    def deregister(self) -> FlowResult:
        return self.register(expires=0)

    # --- sessions -----------------------------------------------------------

    def invite(self, target: sip.SipUri | None = None) -> tuple[str, FlowResult]:
        """INVITE, and on 200 confirm with a plain ACK.  Returns the
        call id for a later bye()."""
        target = target or self.impu
        self._counter += 1
        call_id = f"call-{self.node}-{self._counter}"
        req = sip.request(
            "INVITE", target, self._headers("INVITE", call_id, 1, target)
        )
        txn = self._run(req)
        if txn.state != "completed":
            return call_id, FlowResult(None, txn.attempts, [])
        resp = txn.response
        assert resp is not None
        if resp.status == 200:
            ack = sip.request(
                "ACK", target,
                self._headers("ACK", call_id, 1, target, contact=False),
            )
            self.net.send(self.node, self.entry, sip.serialize_message(ack),
                          self.net.now)
            self.net.run_until_idle()
        return call_id, FlowResult(resp.status, txn.attempts, [resp])

    def bye(self, call_id: str, target: sip.SipUri | None = None) -> FlowResult:
        target = target or self.impu
        req = sip.request(
            "BYE", target,
            self._headers("BYE", call_id, 2, target, contact=False),
        )
        txn = self._run(req)
        if txn.state != "completed":
            return FlowResult(None, txn.attempts, [])
        assert txn.response is not None
        return FlowResult(txn.response.status, txn.attempts, [txn.response])
