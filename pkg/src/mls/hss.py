"""Home subscriber store: identities, keys, roles, SQN counters, and
current registration bindings.

Persistence is line-oriented JSON (`subscribers.jsonl` schema): each
line is an object with a "record" discriminator, either

    {"record": "subscriber", "impi": ..., "impus": [...], "k": "<hex>",
     "roles": [...], "student_id": ..., "sqn": n}
    {"record": "binding", "impu": ..., "contact": ..., "expires_at": ms,
     "call_id": ..., "cseq": n}

Keys are plaintext hex: simulation fixtures, not production practice.
Writes go through a temp file + rename so a crash never leaves a
half-written store.
"""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path

from .sip import SipUri, parse_uri

VALID_ROLES = frozenset({"student", "faculty", "admin"})


class HssError(Exception):
    pass


class DuplicateIdentity(HssError):
    pass


class UnknownIdentity(HssError):
    pass


class StaleCseq(HssError):
    pass


@dataclasses.dataclass
class Subscriber:
    impi: str
    impus: tuple[SipUri, ...]
    k: bytes
    roles: frozenset[str]
    student_id: str
    sqn: int = 0

    def validate(self) -> None:
        if not self.impi:
            raise ValueError("empty impi")
        if not self.impus:
            raise ValueError("subscriber needs at least one impu")
        if len(self.k) != 16:
            raise ValueError("k must be 16 bytes")
        if not self.roles or not self.roles <= VALID_ROLES:
            raise ValueError(f"roles must be a non-empty subset of {sorted(VALID_ROLES)}")


@dataclasses.dataclass
class RegistrationBinding:
    impu: SipUri
    contact: SipUri
    expires_at: int  # simulated time, ms
    call_id: str
    cseq: int


class HssStore:
    def __init__(self) -> None:
        self._by_impi: dict[str, Subscriber] = {}
        self._by_impu: dict[str, Subscriber] = {}
        self._bindings: dict[tuple[str, str], RegistrationBinding] = {}
        self._cseq_by_call_id: dict[str, int] = {}

    # --- subscribers ---------------------------------------------------

    def provision(self, sub: Subscriber) -> None:
        sub.validate()
        if sub.impi in self._by_impi:
            raise DuplicateIdentity(sub.impi)
        for impu in sub.impus:
            if impu.render() in self._by_impu:
                raise DuplicateIdentity(impu.render())
        self._by_impi[sub.impi] = sub
        for impu in sub.impus:
            self._by_impu[impu.render()] = sub

    def lookup_by_impi(self, impi: str) -> Subscriber:
        try:
            return self._by_impi[impi]
        except KeyError:
            raise UnknownIdentity(impi) from None

    def lookup_by_impu(self, impu: SipUri) -> Subscriber:
        try:
            return self._by_impu[impu.render()]
        except KeyError:
            raise UnknownIdentity(impu.render()) from None

    def subscribers(self) -> list[Subscriber]:
        return list(self._by_impi.values())

    # --- sequence counters ----------------------------------------------

    def advance_sqn(self, impi: str) -> int:
        sub = self.lookup_by_impi(impi)
        sub.sqn += 1
        return sub.sqn

    def resync_sqn(self, impi: str, ue_sqn: int) -> None:
        """Jump the counter past the UE's view: next vector uses ue_sqn+1."""
        sub = self.lookup_by_impi(impi)
        sub.sqn = ue_sqn + 1

    # --- registration bindings -------------------------------------------

    def bind(
        self,
        impu: SipUri,
        contact: SipUri,
        expires_at: int,
        call_id: str,
        cseq: int,
    ) -> None:
        self.lookup_by_impu(impu)
        last = self._cseq_by_call_id.get(call_id)
        if last is not None and cseq <= last:
            raise StaleCseq(f"cseq {cseq} <= {last} for {call_id}")
        self._cseq_by_call_id[call_id] = cseq
        self._bindings[(impu.render(), contact.render())] = RegistrationBinding(
            impu=impu, contact=contact, expires_at=expires_at,
            call_id=call_id, cseq=cseq,
        )

    def unbind(self, impu: SipUri, contact: SipUri | None = None) -> int:
        keys = [
            key for key in self._bindings
            if key[0] == impu.render()
            and (contact is None or key[1] == contact.render())
        ]
        for key in keys:
            del self._bindings[key]
        return len(keys)

    def bindings(self, impu: SipUri) -> list[RegistrationBinding]:
        return [b for (i, _), b in self._bindings.items() if i == impu.render()]

    def all_bindings(self) -> list[RegistrationBinding]:
        return list(self._bindings.values())

    def purge_expired(self, now: int) -> int:
        dead = [k for k, b in self._bindings.items() if b.expires_at <= now]
        for key in dead:
            del self._bindings[key]
        return len(dead)

    # --- persistence -------------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="ascii") as fh:
            for sub in self._by_impi.values():
                fh.write(json.dumps(_subscriber_to_dict(sub)) + "\n")
            for binding in self._bindings.values():
                fh.write(json.dumps({
                    "record": "binding",
                    "impu": binding.impu.render(),
                    "contact": binding.contact.render(),
                    "expires_at": binding.expires_at,
                    "call_id": binding.call_id,
                    "cseq": binding.cseq,
                }) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "HssStore":
        store = cls()
        with open(path, encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if obj.get("record") == "binding":
                    impu = parse_uri(obj["impu"])
                    store.lookup_by_impu(impu)  # raises on orphan binding
                    store._bindings[(obj["impu"], obj["contact"])] = (
                        RegistrationBinding(
                            impu=impu,
                            contact=parse_uri(obj["contact"]),
                            expires_at=obj["expires_at"],
                            call_id=obj["call_id"],
                            cseq=obj["cseq"],
                        )
                    )
                    store._cseq_by_call_id[obj["call_id"]] = obj["cseq"]
                else:
                    store.provision(subscriber_from_dict(obj))
        return store


def _subscriber_to_dict(sub: Subscriber) -> dict:
    return {
        "record": "subscriber",
        "impi": sub.impi,
        "impus": [u.render() for u in sub.impus],
        "k": sub.k.hex(),
        "roles": sorted(sub.roles),
        "student_id": sub.student_id,
        "sqn": sub.sqn,
    }


def subscriber_from_dict(obj: dict) -> Subscriber:
    return Subscriber(
        impi=obj["impi"],
        impus=tuple(parse_uri(u) for u in obj["impus"]),
        k=bytes.fromhex(obj["k"]),
        roles=frozenset(obj["roles"]),
        student_id=obj["student_id"],
        sqn=obj.get("sqn", 0),
    )
