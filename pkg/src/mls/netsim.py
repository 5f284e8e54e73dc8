"""Deterministic discrete-event transport with seeded delay/loss links
and a doubling-timer client retransmission machine.

Determinism contract: identical (topology, link seeds, send schedule)
yields byte-identical trace dumps.  All randomness comes from SplitMix64
streams, one per link direction: the a->b direction of a link with seed
s draws from SplitMix64(2s mod 2^64), the b->a direction from
SplitMix64(2s+1 mod 2^64).  A send is dropped when the direction
stream's next float is < loss_prob; draws happen in send order, so an
independent script can replay every drop decision.

Trace dump format, one line per event, tab-separated:

    at<TAB>from<TAB>to<TAB>disposition<TAB>payload_hash

where payload_hash is the first 16 hex chars of SHA-256(payload).
Dropped sends still appear in the trace, timestamped at their would-be
arrival instant.
"""

from __future__ import annotations

import dataclasses
import hashlib
import heapq
from typing import Callable

from . import sip
from .rng import SplitMix64

# Transmission offsets for a reliable client transaction: initial send
# plus retransmissions with a doubling timer, then a final timeout one
# doubled timer after the last retransmission.
RETRANSMIT_OFFSETS_MS = (0, 500, 1000, 2000, 4000, 8000, 16000, 32000)
TIMEOUT_OFFSET_MS = 64000
MAX_ATTEMPTS = 7  # retransmissions after the initial send


class NetError(Exception):
    pass


class NoRoute(NetError):
    pass


class DuplicateLink(NetError):
    pass


@dataclasses.dataclass(frozen=True)
class LinkConfig:
    delay_ms: int = 0
    loss_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.delay_ms < 0:
            raise ValueError("delay_ms must be non-negative")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")


@dataclasses.dataclass(frozen=True)
class SimEvent:
    at: int
    src: str
    dst: str
    payload: bytes
    disposition: str  # "delivered" | "dropped"
    seq: int


Trace = list  # list[SimEvent], ordered by (at, seq)


def dump_trace(trace: list[SimEvent]) -> str:
    lines = []
    for ev in trace:
        digest = hashlib.sha256(ev.payload).hexdigest()[:16]
        lines.append(f"{ev.at}\t{ev.src}\t{ev.dst}\t{ev.disposition}\t{digest}")
    return "\n".join(lines) + ("\n" if lines else "")


@dataclasses.dataclass
class ClientTransaction:
    """Reliable (retransmitting) non-ACK client request.

    attempts counts retransmissions after the initial send; the machine
    gives up after MAX_ATTEMPTS of them.
    """

    request: sip.SipMessage
    src: str = ""
    dst: str = ""
    timer_a_ms: int = 500
    attempts: int = 0
    state: str = "trying"  # trying | completed | timed_out
    response: sip.SipMessage | None = None
    send_times: list[int] = dataclasses.field(default_factory=list)


Handler = Callable[["Network", int, str, bytes], None]


class _Link:
    def __init__(self, a: str, b: str, cfg: LinkConfig):
        self.a, self.b, self.cfg = a, b, cfg
        mask = (1 << 64) - 1
        self._rng = {
            (a, b): SplitMix64((2 * cfg.seed) & mask),
            (b, a): SplitMix64((2 * cfg.seed + 1) & mask),
        }

    def drop(self, src: str, dst: str) -> bool:
        return self._rng[(src, dst)].next_float() < self.cfg.loss_prob


class Network:
    def __init__(self) -> None:
        self._handlers: dict[str, Handler | None] = {}
        self._links: dict[tuple[str, str], _Link] = {}
        self._queue: list[tuple[int, int, object]] = []
        self._seq = 0
        self._trace: list[SimEvent] = []
        self._transactions: list[ClientTransaction] = []
        self.now = 0

    # --- topology -----------------------------------------------------

    def add_node(self, name: str, handler: Handler | None = None) -> None:
        if name in self._handlers:
            raise NetError(f"node {name!r} already exists")
        self._handlers[name] = handler

    def set_handler(self, name: str, handler: Handler | None) -> None:
        if name not in self._handlers:
            raise NoRoute(name)
        self._handlers[name] = handler

    def connect(self, a: str, b: str, cfg: LinkConfig) -> tuple[str, str]:
        for node in (a, b):
            if node not in self._handlers:
                raise NoRoute(node)
        key = (min(a, b), max(a, b))
        if key in self._links:
            raise DuplicateLink(f"{a}<->{b}")
        link = _Link(a, b, cfg)
        self._links[key] = link
        return key

    def _link_for(self, src: str, dst: str) -> _Link:
        try:
            return self._links[(min(src, dst), max(src, dst))]
        except KeyError:
            raise NoRoute(f"{src}->{dst}") from None

    # --- scheduling -----------------------------------------------------

    def _push(self, at: int, item: object) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, item))

    def call_at(self, at: int, fn: Callable[[int], None]) -> None:
        """Schedule a timer callback; timers do not appear in the trace."""
        self._push(at, fn)

    def send(self, src: str, dst: str, payload: bytes, at: int) -> None:
        if dst not in self._handlers:
            raise NoRoute(dst)
        link = self._link_for(src, dst)
        dropped = link.drop(src, dst)
        arrival = at + link.cfg.delay_ms
        self._seq += 1
        event = SimEvent(
            at=arrival, src=src, dst=dst, payload=payload,
            disposition="dropped" if dropped else "delivered",
            seq=self._seq,
        )
        heapq.heappush(self._queue, (arrival, self._seq, event))

    # --- reliable client transactions -----------------------------------

    def send_reliable(
        self, txn: ClientTransaction, src: str, dst: str, at: int | None = None
    ) -> ClientTransaction:
        """Arm a retransmitting transaction; resolves during run_until_idle."""
        if txn.request.method == "ACK":
            raise NetError("ACK is never sent reliably")
        start = self.now if at is None else at
        txn.src, txn.dst = src, dst
        self._transactions.append(txn)
        payload = sip.serialize_message(txn.request)

        def fire(index: int):
            def _fire(now: int) -> None:
                if txn.state != "trying":
                    return
                if index > 0:
                    txn.attempts = index
                    txn.timer_a_ms = (
                        RETRANSMIT_OFFSETS_MS[index + 1] - RETRANSMIT_OFFSETS_MS[index]
                        if index + 1 < len(RETRANSMIT_OFFSETS_MS)
                        else TIMEOUT_OFFSET_MS - RETRANSMIT_OFFSETS_MS[index]
                    )
                txn.send_times.append(now)
                self.send(src, dst, payload, now)
            return _fire

        for i, offset in enumerate(RETRANSMIT_OFFSETS_MS):
            self.call_at(start + offset, fire(i))

        def timeout(now: int) -> None:
            if txn.state == "trying":
                txn.state = "timed_out"

        self.call_at(start + TIMEOUT_OFFSET_MS, timeout)
        return txn

    def _match_transaction(self, dst: str, payload: bytes) -> bool:
        try:
            msg = sip.parse_message(payload)
        except sip.ParseError:
            return False
        if msg.kind != "response":
            return False
        for txn in self._transactions:
            if txn.state != "trying" or txn.src != dst:
                continue
            if (msg.header("Call-ID") == txn.request.header("Call-ID")
                    and msg.header("CSeq") == txn.request.header("CSeq")):
                txn.state = "completed"
                txn.response = msg
                return True
        return False

    # --- execution -----------------------------------------------------

    def run_until_idle(self) -> list[SimEvent]:
        """Process all pending events; returns the events of this run."""
        start_index = len(self._trace)
        while self._queue:
            at, _, item = heapq.heappop(self._queue)
            self.now = max(self.now, at)
            if callable(item):
                item(self.now)
                continue
            ev: SimEvent = item  # type: ignore[assignment]
            self._trace.append(ev)
            if ev.disposition != "delivered":
                continue
            if self._match_transaction(ev.dst, ev.payload):
                continue
            handler = self._handlers.get(ev.dst)
            if handler is not None:
                handler(self, ev.at, ev.src, ev.payload)
        return self._trace[start_index:]

    @property
    def trace(self) -> list[SimEvent]:
        return self._trace
