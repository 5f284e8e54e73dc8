"""Integration bridge to the campus registration backend (mocked).

Delivery model is at-least-once with an idempotent remote: every record
carries a monotone sequence number, the remote deduplicates on it, and
the reconciliation loop retries pending records strictly in sequence
order so a drop never overtakes its own add.  The in-process mock sits
behind the same two-call surface (apply/enrollments) a real HTTP client
would implement; swapping in a real backend means implementing that
surface.
"""

from __future__ import annotations

import dataclasses

from .rng import SplitMix64

ATTEMPT_BUDGET = 16


class OdusError(Exception):
    pass


class RemoteUnavailable(OdusError):
    """Injected transient failure; the record stays pending."""


class Unreconciled(OdusError):
    def __init__(self, remaining: int):
        super().__init__(f"{remaining} records still pending")
        self.remaining = remaining


@dataclasses.dataclass
class SyncRecord:
    seq: int
    op: str  # "add" | "drop"
    student_id: str
    course_code: str
    status: str = "pending"  # pending | acked


class RemoteOdus:
    """Mock remote registrar with seeded failure injection."""

    def __init__(self, failure_prob: float = 0.0, seed: int = 0):
        if not 0.0 <= failure_prob <= 1.0:
            raise ValueError("failure_prob must be in [0, 1]")
        self.failure_prob = failure_prob
        self._rng = SplitMix64(seed)
        self.enrollments: set[tuple[str, str]] = set()
        self._applied_seqs: set[int] = set()

    def apply(self, rec: SyncRecord) -> None:
        """Apply one operation; idempotent per sequence number.  The
        failure draw happens before any state change, so a failed call
        leaves the remote untouched."""
        if self._rng.next_float() < self.failure_prob:
            raise RemoteUnavailable(rec.seq)
        if rec.seq in self._applied_seqs:
            return
        self._applied_seqs.add(rec.seq)
        key = (rec.student_id, rec.course_code)
        if rec.op == "add":
            self.enrollments.add(key)
        elif rec.op == "drop":
            self.enrollments.discard(key)
        else:
            raise ValueError(f"unknown op {rec.op!r}")


class OdusBridge:
    def __init__(self, remote: RemoteOdus):
        self.remote = remote
        self._records: list[SyncRecord] = []
        self._next_seq = 1

    def enqueue(self, op: str, student_id: str, course_code: str) -> SyncRecord:
        rec = SyncRecord(self._next_seq, op, student_id, course_code)
        self._next_seq += 1
        self._records.append(rec)
        return rec

    def pending(self) -> list[SyncRecord]:
        return [r for r in self._records if r.status == "pending"]

    def push(self, rec: SyncRecord) -> None:
        """One delivery attempt; raises RemoteUnavailable on injected
        failure.  Acked records are never re-mutated."""
        if rec.status == "acked":
            return
        self.remote.apply(rec)
        rec.status = "acked"

    def reconcile(self) -> int:
        """Flush pending records in seq order, up to 16 attempts each.
        Stops at the first record that exhausts its budget so ordering
        is preserved; raises Unreconciled with the count left over."""
        flushed = 0
        pending = sorted(self.pending(), key=lambda r: r.seq)
        for i, rec in enumerate(pending):
            for _ in range(ATTEMPT_BUDGET):
                try:
                    self.push(rec)
                    break
                except RemoteUnavailable:
                    continue
            if rec.status != "acked":
                raise Unreconciled(len(pending) - i)
            flushed += 1
        return flushed
