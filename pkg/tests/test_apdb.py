import itertools
import random

import pytest

from abcast.apdb import BOTTOM, assemble_lock, disperse, lock_threshold, recover, validate_lock
from abcast.apdb.dispersal import Lock, stored_message
from abcast.codec import MerkleTree, rs_encode
from abcast.core.encoding import encode
from abcast.core.types import envelope_size
from abcast.crypto import Blocklist, MockBackend, qc_assemble, qc_message

from apdb_net import run_dispersal


@pytest.mark.parametrize("n", [4, 7])
def test_every_f_plus_one_subset_recovers(n):
    f = (n - 1) // 3
    payload = random.Random(n).randbytes(333)
    stores = disperse(payload, n, f)
    assert all(st.valid(n) for st in stores)
    for subset in itertools.combinations(range(n), f + 1):
        frags = {i: stores[i].fragment for i in subset}
        assert recover(frags, stores[0].root, len(payload), n, f) == payload


def test_too_few_fragments():
    stores = disperse(b"abc", 4, 1)
    with pytest.raises(ValueError):
        recover({0: stores[0].fragment}, stores[0].root, 3, 4, 1)


def _stored_sigs(backend, instance, root, length, signers):
    return {i: backend.sign(i, stored_message(instance, root, length)) for i in signers}


def test_lock_needs_two_f_plus_one():
    n, f = 4, 1
    be = MockBackend(n, 0)
    inst = (("pd", 0, 0), 2)
    st = disperse(b"payload", n, f)[0]
    assert lock_threshold(f) == 3
    for size in range(n + 1):
        for signers in itertools.combinations(range(n), size):
            lock = assemble_lock(inst, st.root, st.length, _stored_sigs(be, inst, st.root, st.length, signers), Blocklist(), be, f)
            if size < 3:
                assert lock is None
            else:
                assert lock is not None and validate_lock(lock, be, f, inst)


def test_lock_binds_instance_and_root():
    n, f = 4, 1
    be = MockBackend(n, 0)
    inst = (("pd", 0, 0), 2)
    st = disperse(b"payload", n, f)[0]
    lock = assemble_lock(inst, st.root, st.length, _stored_sigs(be, inst, st.root, st.length, range(3)), Blocklist(), be, f)
    assert not validate_lock(lock, be, f, (("pd", 0, 1), 2))
    moved = Lock(inst, b"\x00" * 32, lock.length, lock.cert)
    assert not validate_lock(moved, be, f)
    # a 2-of-4 certificate passes a plain quorum check of 2 but not the lock threshold
    mid = (inst, st.root, st.length)
    thin = qc_assemble(mid, {i: be.sign(i, qc_message(mid)) for i in (0, 1)}, Blocklist(), be, 2)
    assert not validate_lock(Lock(inst, st.root, st.length, thin), be, f)
    assert not validate_lock("junk", be, f)


def test_store_with_wrong_index_is_invalid():
    stores = disperse(b"some payload", 4, 1)
    st = stores[1]
    moved = type(st)(st.root, 2, st.fragment, st.proof, st.length)
    assert not moved.valid(4)


def _bad_codeword(payload, n, f, victims):
    cw = rs_encode(payload, f + 1, n)
    shards = list(cw.shards)
    for v in victims:
        shards[v] = bytes([shards[v][0] ^ 0x5A]) + shards[v][1:]
    return shards, MerkleTree(shards).root


@pytest.mark.parametrize("n", [4, 7])
def test_non_codeword_gives_bottom_for_every_subset(n):
    f = (n - 1) // 3
    payload = random.Random(1).randbytes(120)
    for victim in range(n):
        shards, root = _bad_codeword(payload, n, f, [victim])
        for subset in itertools.combinations(range(n), f + 1):
            assert recover({i: shards[i] for i in subset}, root, len(payload), n, f) is BOTTOM


def test_recast_agreement_fault_injection():
    """1000 random dispersals, some committing to non-codewords. Every
    honest node reconstructs from its own random f + 1 fragments; they
    must all agree on the value or on failure."""
    rng = random.Random(8)
    outcomes = set()
    for trial in range(1000):
        n = rng.choice((4, 7, 10))
        f = (n - 1) // 3
        payload = rng.randbytes(rng.randint(1, 400))
        victims = rng.sample(range(n), rng.randint(0, f)) if rng.random() < 0.5 else []
        shards, root = _bad_codeword(payload, n, f, victims)
        results = set()
        for node in range(n - f):
            subset = rng.sample(range(n), f + 1)
            out = recover({i: shards[i] for i in subset}, root, len(payload), n, f)
            results.add(out)
        assert len(results) == 1
        (out,) = results
        assert out == (BOTTOM if victims else payload)
        outcomes.add(out is BOTTOM)
    assert outcomes == {True, False}


def test_honest_dispersal_mvba_single_attempt():
    inputs = [b"ok-%d" % i * 40 for i in range(4)]
    sim, dms, decided = run_dispersal(4, 3, inputs)
    assert len(decided) == 4 and len(set(decided.values())) == 1
    assert decided[0] in inputs
    assert all(dm.rounds == 1 for dm in dms)


def test_garbage_lock_costs_at_most_one_extra_attempt():
    attempts = []
    n = 4
    inputs = [b"ok-%d" % i * 40 for i in range(n)]
    for seed in range(300):
        sim, dms, decided = run_dispersal(n, seed, inputs, garbage={3})
        honest = [decided.get(i) for i in range(3)]
        assert None not in honest and len(set(honest)) == 1
        assert honest[0] in inputs[:3]
        attempts.append(dms[0].rounds)
    assert max(attempts) <= 2
    assert sum(attempts) / len(attempts) <= 2


def test_outer_predicate_rejection_moves_on():
    inputs = [b"ok-a", b"ok-b", b"no-c", b"ok-d"]
    for seed in range(20):
        sim, dms, decided = run_dispersal(4, seed, inputs)
        assert len(set(decided.values())) == 1
        assert decided[0].startswith(b"ok")


def test_dispersal_bytes_against_multicast_n13():
    """Value = 13 framed QCs. Dispersal traffic (STORE out, STORED back)
    versus sending the value itself to every other node."""
    n, f = 13, 4
    be = MockBackend(n, 0)
    q = n - f
    qcs = []
    for j in range(n):
        mid = (j, 1, bytes([j]) * 32)
        qcs.append(qc_assemble(mid, {i: be.sign(i, qc_message(mid)) for i in range(q)}, Blocklist(), be, q))
    value = encode(tuple(qc.to_wire() for qc in qcs))
    session = ("pd", 0, 0)
    multicast = (n - 1) * envelope_size("VAL", ("ag", 0), value)
    stores = disperse(value, n, f)
    sig = be.sign(0, b"x")
    dispersal = sum(
        envelope_size("STORE", session, (st.root, st.fragment, st.proof, st.length))
        + envelope_size("STORED", session, (st.root, st.length, sig))
        for st in stores[1:]
    )
    assert dispersal / multicast <= 0.45
