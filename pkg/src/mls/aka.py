"""Challenge-response mutual authentication between UE and the core.

Vector derivation (documented bit-exactly so a short independent script
can reproduce any value):

    f_i(k, data) = HMAC-SHA-256(k, bytes([i]) || data)      i in 1..5

    mac  = f_1(k, sqn_6be || amf || rand)[:8]
    xres = f_2(k, rand)[:8]
    ck   = f_3(k, rand)[:16]
    ik   = f_4(k, rand)[:16]
    ak   = f_5(k, rand)[:6]
    autn = (sqn_6be XOR ak) || amf || mac          (6 + 2 + 8 = 16 bytes)

with sqn_6be the 48-bit sequence counter big-endian and amf fixed to
0x8000.  This is not MILENAGE; it is a desk-scale stand-in with the same
shape and freshness semantics.
"""

from __future__ import annotations

import dataclasses
import hashlib
import hmac

AMF = b"\x80\x00"
KEY_LEN = 16
RAND_LEN = 16
RES_LEN = 8
AUTN_LEN = 16
SQN_MAX = (1 << 48) - 1


class AuthFailure(Exception):
    pass


class MacFailure(AuthFailure):
    """The network token's MAC does not verify: network not authentic."""


class SyncFailure(AuthFailure):
    """Sequence number not fresh; carries the UE's counter for resync."""

    def __init__(self, last_sqn: int):
        super().__init__(f"sqn not fresh, ue last_sqn={last_sqn}")
        self.last_sqn = last_sqn


@dataclasses.dataclass(frozen=True)
class AuthVector:
    rand: bytes
    xres: bytes
    autn: bytes
    ck: bytes
    ik: bytes
    sqn: int


@dataclasses.dataclass(frozen=True)
class UeResponse:
    res: bytes
    ck: bytes
    ik: bytes


def _f(k: bytes, tag: int, data: bytes) -> bytes:
    return hmac.new(k, bytes([tag]) + data, hashlib.sha256).digest()


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def _check_key(k: bytes) -> None:
    if len(k) != KEY_LEN:
        raise ValueError(f"key must be {KEY_LEN} bytes")


def sqn_to_bytes(sqn: int) -> bytes:
    if not 0 <= sqn <= SQN_MAX:
        raise ValueError("sqn out of 48-bit range")
    return sqn.to_bytes(6, "big")


def generate_vector(k: bytes, sqn: int, rand: bytes) -> AuthVector:
    _check_key(k)
    if len(rand) != RAND_LEN:
        raise ValueError(f"rand must be {RAND_LEN} bytes")
    sqn6 = sqn_to_bytes(sqn)
    mac = _f(k, 1, sqn6 + AMF + rand)[:8]
    xres = _f(k, 2, rand)[:RES_LEN]
    ck = _f(k, 3, rand)[:16]
    ik = _f(k, 4, rand)[:16]
    ak = _f(k, 5, rand)[:6]
    autn = _xor(sqn6, ak) + AMF + mac
    return AuthVector(rand=rand, xres=xres, autn=autn, ck=ck, ik=ik, sqn=sqn)


def ue_respond(k: bytes, rand: bytes, autn: bytes, last_sqn: int) -> UeResponse:
    """UE half of mutual auth: verify the network token, then answer.

    Raises MacFailure when the token was not produced under k, and
    SyncFailure when the sequence number is not strictly fresher than
    last_sqn.
    """
    _check_key(k)
    if len(rand) != RAND_LEN or len(autn) != AUTN_LEN:
        raise ValueError("bad rand/autn length")
    ak = _f(k, 5, rand)[:6]
    sqn6 = _xor(autn[:6], ak)
    amf = autn[6:8]
    mac = autn[8:16]
    expected = _f(k, 1, sqn6 + amf + rand)[:8]
    if not hmac.compare_digest(mac, expected):
        raise MacFailure("network token MAC mismatch")
    sqn = int.from_bytes(sqn6, "big")
    if sqn <= last_sqn:
        raise SyncFailure(last_sqn)
    return UeResponse(
        res=_f(k, 2, rand)[:RES_LEN],
        ck=_f(k, 3, rand)[:16],
        ik=_f(k, 4, rand)[:16],
    )


def compute_res(k: bytes, rand: bytes) -> bytes:
    """RES/XRES derivation alone (f_2 truncation)."""
    _check_key(k)
    return _f(k, 2, rand)[:RES_LEN]


def extract_sqn(k: bytes, rand: bytes, autn: bytes) -> int:
    """Sequence number concealed in the network token (UE side)."""
    _check_key(k)
    ak = _f(k, 5, rand)[:6]
    return int.from_bytes(_xor(autn[:6], ak), "big")


def verify_response(xres: bytes, res: bytes) -> bool:
    """Constant-time comparison of the 8-byte expected/actual responses."""
    if len(xres) != RES_LEN or len(res) != RES_LEN:
        raise ValueError("responses must be 8 bytes")
    return hmac.compare_digest(xres, res)
