import pytest

from mls.hss import (
    DuplicateIdentity,
    HssStore,
    StaleCseq,
    Subscriber,
    UnknownIdentity,
    _subscriber_to_dict,
)
from mls.rng import SplitMix64
from mls.sip import SipUri, parse_uri


def make_sub(n: int, roles=("student",)) -> Subscriber:
    return Subscriber(
        impi=f"s{n}@ims.kau.example",
        impus=(parse_uri(f"sip:s{n}@ims.kau.example"),),
        k=bytes([n % 256]) * 16,
        roles=frozenset(roles),
        student_id=f"st-{n}",
    )


def test_provision_and_lookup():
    store = HssStore()
    sub = make_sub(1)
    store.provision(sub)
    assert store.lookup_by_impi(sub.impi) is sub
    assert store.lookup_by_impu(sub.impus[0]) is sub


def test_duplicate_impi_rejected():
    store = HssStore()
    store.provision(make_sub(1))
    with pytest.raises(DuplicateIdentity):
        store.provision(make_sub(1))


def test_duplicate_impu_rejected():
    store = HssStore()
    store.provision(make_sub(1))
    clash = make_sub(2)
    clash.impus = (parse_uri("sip:s1@ims.kau.example"),)
    with pytest.raises(DuplicateIdentity):
        store.provision(clash)


def test_invalid_subscriber_rejected():
    store = HssStore()
    bad = make_sub(1)
    bad.roles = frozenset({"wizard"})
    with pytest.raises(ValueError):
        store.provision(bad)


def test_snapshot_round_trip_100_generated(tmp_path):
    rng = SplitMix64(11)
    store = HssStore()
    for n in range(100):
        sub = make_sub(n)
        sub.sqn = rng.next_below(1000)
        store.provision(sub)
    impu = store.lookup_by_impi("s3@ims.kau.example").impus[0]
    store.bind(impu, parse_uri("sip:ue3@node"), 5000, "cid-3", 1)
    path = tmp_path / "subscribers.jsonl"
    store.save(path)
    loaded = HssStore.load(path)
    original = sorted(
        (_subscriber_to_dict(s) for s in store.subscribers()),
        key=lambda d: d["impi"],
    )
    roundtripped = sorted(
        (_subscriber_to_dict(s) for s in loaded.subscribers()),
        key=lambda d: d["impi"],
    )
    assert original == roundtripped
    assert len(loaded.bindings(impu)) == 1


def test_bind_and_lookup():
    store = HssStore()
    store.provision(make_sub(1))
    impu = parse_uri("sip:s1@ims.kau.example")
    store.bind(impu, parse_uri("sip:ue1@node"), 3_600_000, "cid", 1)
    assert len(store.bindings(impu)) == 1


def test_bind_unknown_identity():
    store = HssStore()
    with pytest.raises(UnknownIdentity):
        store.bind(parse_uri("sip:ghost@x"), parse_uri("sip:c@x"), 10, "cid", 1)


def test_stale_cseq_rejected():
    store = HssStore()
    store.provision(make_sub(1))
    impu = parse_uri("sip:s1@ims.kau.example")
    contact = parse_uri("sip:ue1@node")
    store.bind(impu, contact, 1000, "cid", 5)
    with pytest.raises(StaleCseq):
        store.bind(impu, contact, 2000, "cid", 4)
    with pytest.raises(StaleCseq):
        store.bind(impu, contact, 2000, "cid", 5)
    store.bind(impu, contact, 2000, "cid", 6)


def test_binding_expiry():
    store = HssStore()
    store.provision(make_sub(1))
    impu = parse_uri("sip:s1@ims.kau.example")
    t = 1000
    store.bind(impu, parse_uri("sip:ue1@node"), t + 3600, "cid", 1)
    assert store.purge_expired(t + 3601) == 1
    assert store.bindings(impu) == []


def test_purge_empty_store():
    assert HssStore().purge_expired(0) == 0


def test_purge_matches_brute_force_filter():
    rng = SplitMix64(17)
    store = HssStore()
    expected_survivors = 0
    now = 5000
    for n in range(200):
        sub = make_sub(n)
        store.provision(sub)
        expires_at = rng.next_below(10_000)
        if expires_at > 0:
            store.bind(sub.impus[0], parse_uri(f"sip:ue{n}@node"),
                       expires_at, f"cid-{n}", 1)
            if expires_at > now:  # brute-force survivor rule
                expected_survivors += 1
    store.purge_expired(now)
    assert len(store.all_bindings()) == expected_survivors
    assert all(b.expires_at > now for b in store.all_bindings())


def test_sqn_advances():
    store = HssStore()
    store.provision(make_sub(1))
    impi = "s1@ims.kau.example"
    assert store.advance_sqn(impi) == 1
    assert store.advance_sqn(impi) == 2


def test_resync_then_advance():
    store = HssStore()
    store.provision(make_sub(1))
    impi = "s1@ims.kau.example"
    store.resync_sqn(impi, 10)  # counter jumps to 11
    assert store.advance_sqn(impi) == 12


def test_sqn_trace_oracle():
    # replay a mixed op sequence against a plain integer model
    store = HssStore()
    store.provision(make_sub(1))
    impi = "s1@ims.kau.example"
    model = 0
    rng = SplitMix64(3)
    seen = []
    for _ in range(500):
        if rng.next_below(4) == 0:
            ue_sqn = model + rng.next_below(5)
            store.resync_sqn(impi, ue_sqn)
            model = ue_sqn + 1
        else:
            model += 1
            got = store.advance_sqn(impi)
            assert got == model
            seen.append(got)
    assert seen == sorted(seen)
    assert len(set(seen)) == len(seen)


def test_unbind():
    store = HssStore()
    store.provision(make_sub(1))
    impu = parse_uri("sip:s1@ims.kau.example")
    store.bind(impu, parse_uri("sip:ue1@node"), 1000, "cid", 1)
    assert store.unbind(impu) == 1
    assert store.bindings(impu) == []
