import itertools
import math
import random

import pytest

from abcast.broadcast import (
    ACCEPT,
    PENDING,
    REJECT,
    ChainReceiver,
    ChainSender,
    PullService,
    WeakRBC,
    value_digest,
    vote_message,
)
from abcast.core import ProtocolParams, Transaction
from abcast.core.runtime import NodeRuntime
from abcast.crypto import Blocklist, MockBackend, qc_assemble, qc_verify
from abcast.simnet.sim import Simulator

from harness import Scripted

SESSION = ("rb",)


class RbcNode:
    def __init__(self, rt, sender, predicate=None, bad=False):
        self.rt = rt
        self.bad = bad
        self.inst = WeakRBC(self, sender, "k", rt.quorum, rt.f, predicate)
        self.wr = []
        self.r = []
        rt.register(SESSION, self)

    def rbc_send(self, inst, kind, digest):
        self.rt.multicast(SESSION, kind, digest)

    def rbc_wr_deliver(self, inst, digest):
        self.wr.append(digest)

    def rbc_r_deliver(self, inst, value):
        self.r.append(value)

    def handle(self, src, kind, body):
        if self.bad:
            return
        if kind == "VAL":
            self.inst.on_val(src, body)
        elif kind == "ECHO":
            self.inst.on_echo(src, body)
        elif kind == "READY":
            self.inst.on_ready(src, body)


def rbc_net(n, seed, sender=0, bad=(), adversary=None, predicate=None):
    backend = MockBackend(n, seed)
    params = ProtocolParams(n)
    sim = Simulator(n, seed, adversary=adversary, trace=False)
    nodes = []
    for i in range(n):
        node = RbcNode(NodeRuntime(i, params, backend), sender, predicate, bad=i in bad)
        sim.add_node(node)
        nodes.append(node)
    for i in bad:
        sim.corrupt(i)
    return sim, nodes


def test_honest_sender_everyone_delivers():
    sim, nodes = rbc_net(4, 1)
    nodes[0].rt.multicast(SESSION, "VAL", b"value")
    sim.flush(0)
    sim.run()
    d = value_digest(b"value")
    for nd in nodes:
        assert nd.wr == [d] and nd.r == [b"value"]


@pytest.mark.parametrize("seed", range(60))
def test_partial_val_still_reaches_everyone(seed):
    """VAL reaches only 2f + 1 nodes: all wr-deliver, at least n - 2f
    r-deliver."""
    n, f = 4, 1
    rng = random.Random(seed)
    receivers = rng.sample(range(n), 2 * f + 1)
    sim, nodes = rbc_net(n, seed)
    for d in receivers:
        nodes[0].rt.send(d, SESSION, "VAL", b"v")
    sim.flush(0)
    sim.run()
    d = value_digest(b"v")
    assert all(nd.wr == [d] for nd in nodes)
    assert sum(nd.r == [b"v"] for nd in nodes) >= n - 2 * f


def _equivocation_run(n, seed):
    """Corrupt sender 0 sends two values and pushes ECHO/READY for both."""
    f = (n - 1) // 3
    rng = random.Random(seed)
    bad = set(range(f))
    sim, nodes = rbc_net(n, seed, bad=bad)
    va, vb = b"A" * 4, b"B" * 4
    da, db = value_digest(va), value_digest(vb)
    for d in range(n):
        side = rng.random() < 0.5
        for j in bad:
            nodes[j].rt.send(d, SESSION, "ECHO", da if side else db)
            if rng.random() < 0.5:
                nodes[j].rt.send(d, SESSION, "READY", da if side else db)
        nodes[0].rt.send(d, SESSION, "VAL", va if side else vb)
    for j in bad:
        sim.flush(j)
    sim.run()
    honest = [nd for i, nd in enumerate(nodes) if i not in bad]
    got = {d for nd in honest for d in nd.wr}
    assert len(got) <= 1
    for nd in honest:
        assert len(nd.wr) <= 1 and len(nd.r) <= 1
        if nd.r and got:
            assert value_digest(nd.r[0]) in got


def test_no_conflicting_deliveries_n4():
    for seed in range(300):
        _equivocation_run(4, seed)


@pytest.mark.parametrize("n", [7, 10])
def test_no_conflicting_deliveries_larger(n):
    for seed in range(1000 if n == 7 else 300):
        _equivocation_run(n, seed)


class Recorder:
    def __init__(self):
        self.sent = []
        self.wr = None
        self.r = None

    def rbc_send(self, inst, kind, digest):
        self.sent.append((kind, digest))

    def rbc_wr_deliver(self, inst, digest):
        self.wr = digest

    def rbc_r_deliver(self, inst, value):
        self.r = value


def test_abandon_blocks_echo_but_not_ready():
    host = Recorder()
    inst = WeakRBC(host, 0, "k", 3, 1)
    inst.abandon()
    inst.on_val(0, b"v")
    assert host.sent == []
    d = value_digest(b"v")
    inst.on_ready(1, d)
    inst.on_ready(2, d)
    assert host.sent == [("READY", d)]
    inst.on_ready(3, d)
    assert host.wr == d and host.r is None


def test_first_val_wins_and_non_sender_ignored():
    host = Recorder()
    inst = WeakRBC(host, 0, "k", 3, 1)
    inst.on_val(2, b"x")
    assert host.sent == []
    inst.on_val(0, b"a")
    inst.on_val(0, b"b")
    assert host.sent == [("ECHO", value_digest(b"a"))]


def test_predicate_pending_then_accept():
    state = {"ok": PENDING}
    host = Recorder()
    inst = WeakRBC(host, 0, "k", 3, 1, lambda v: state["ok"])
    inst.on_val(0, b"v")
    assert host.sent == []
    state["ok"] = ACCEPT
    inst.reevaluate()
    assert host.sent == [("ECHO", value_digest(b"v"))]


def test_predicate_reject_is_final():
    host = Recorder()
    inst = WeakRBC(host, 0, "k", 3, 1, lambda v: REJECT)
    inst.on_val(0, b"v")
    inst.reevaluate()
    assert host.sent == []


def test_pending_value_dropped_on_abandon():
    state = {"ok": PENDING}
    host = Recorder()
    inst = WeakRBC(host, 0, "k", 3, 1, lambda v: state["ok"])
    inst.on_val(0, b"v")
    inst.abandon()
    state["ok"] = ACCEPT
    inst.reevaluate()
    assert host.sent == []


def test_abandon_everywhere_before_val_delivers_nothing():
    """Abandoning before VAL arrives means no ECHO quorum can form, even
    when a corrupt node pushes READY for some other value."""
    sim, nodes = rbc_net(4, 3, bad={3})
    for nd in nodes[:3]:
        nd.inst.abandon()
    nodes[0].rt.multicast(SESSION, "VAL", b"v")
    nodes[3].rt.multicast(SESSION, "READY", value_digest(b"w"))
    sim.flush(0)
    sim.flush(3)
    sim.run()
    assert all(nd.wr == [] for nd in nodes[:3])


def test_totality_survives_abandon():
    """Hold VAL and ECHO towards node 2; once node 1 wr-delivers, every honest
    node abandons. Node 2 still wr-delivers from READY alone."""
    state = {"hold": True}

    def route(sim, env, base):
        if state["hold"] and env.dst == 2 and env.kind in ("VAL", "ECHO"):
            return None
        return base

    sim, nodes = rbc_net(4, 2, adversary=Scripted(route))
    nodes[0].rt.multicast(SESSION, "VAL", b"v")
    sim.flush(0)
    sim.run(stop=lambda: bool(nodes[1].wr), check_every=1)
    assert nodes[1].wr
    for nd in nodes:
        nd.inst.abandon()
    sim.run()
    assert all(nd.wr == [value_digest(b"v")] for nd in nodes)


# QC-chained broadcast

def chain_setup(n=4, seed=0):
    backend = MockBackend(n, seed)
    params = ProtocolParams(n)
    rts = [NodeRuntime(i, params, backend) for i in range(n)]
    return backend, rts


def txs(tag, k=2):
    return [Transaction(f"{tag}-{i}".encode()) for i in range(k)]


def test_genesis_proposal_accepted():
    backend, rts = chain_setup()
    sender = ChainSender(rts[0])
    s, batch, qc = sender.propose(txs("a"))
    assert s == 1 and qc.is_genesis
    rx = ChainReceiver(0, 4, 16)
    assert rx.offer(s, batch, qc, backend, 3) == [(1, batch, qc)]


def _votes(backend, sender, s, digest, voters, bad=()):
    msg = vote_message(sender, s, digest)
    return {v: backend.sign(v, msg if v not in bad else msg + b"x") for v in voters}


def test_quorum_of_votes_certifies_and_advances():
    backend, rts = chain_setup()
    sender = ChainSender(rts[0])
    _, batch, _ = sender.propose(txs("a"))
    qc = None
    for v, sig in _votes(backend, 0, 1, batch.digest, [1, 2, 3]).items():
        assert qc is None
        qc = sender.on_vote(v, 1, sig)
    assert qc is not None and sender.can_propose()
    s, batch2, carried = sender.propose(txs("b"))
    assert s == 2 and carried is qc
    assert qc_verify(carried, (0, 1, batch.digest), backend, 3)


def test_bad_vote_blocklisted_qc_from_the_rest():
    backend, rts = chain_setup()
    sender = ChainSender(rts[0])
    _, batch, _ = sender.propose(txs("a"))
    votes = _votes(backend, 0, 1, batch.digest, [0, 1, 2, 3], bad={2})
    results = [sender.on_vote(v, 1, votes[v]) for v in (0, 1, 2, 3)]
    qc = results[-1]
    assert results[:3] == [None, None, None]
    assert qc is not None and qc.signers.indices() == [0, 1, 3]
    assert rts[0].blocklist.banned == {2}


def test_receiver_chain_of_three_slots():
    backend, rts = chain_setup()
    sender = ChainSender(rts[0])
    rx = ChainReceiver(0, 4, 16)
    voted = 0
    for _ in range(3):
        s, batch, qc = sender.propose(txs(f"s{sender.slot}"))
        if rx.offer(s, batch, qc, backend, 3):
            voted += 1
        for v, sig in _votes(backend, 0, s, batch.digest, [1, 2, 3]).items():
            sender.on_vote(v, s, sig)
    assert voted == 3
    assert rx.certified_digest(2) == rx.batches[2].digest


def test_receiver_parks_out_of_order_and_rejects_bad_qc():
    backend, rts = chain_setup()
    sender = ChainSender(rts[0])
    props = []
    for _ in range(3):
        props.append(sender.propose(txs(f"s{sender.slot}")))
        s, batch, _ = props[-1]
        for v, sig in _votes(backend, 0, s, batch.digest, [1, 2, 3]).items():
            sender.on_vote(v, s, sig)
    rx = ChainReceiver(0, 4, 16)
    assert rx.offer(*props[2], backend, 3) == []
    assert rx.offer(*props[1], backend, 3) == []
    assert [p[0] for p in rx.offer(*props[0], backend, 3)] == [1, 2, 3]

    rx2 = ChainReceiver(0, 4, 16)
    rx2.offer(*props[0], backend, 3)
    s, batch, qc = props[1]
    forged = type(qc)(qc.message_id, qc.sig, qc.signers.flip(0))
    assert rx2.offer(s, batch, forged, backend, 3) == []
    assert rx2.accepted == 1


def test_receiver_records_equivocation():
    backend, rts = chain_setup()
    sender = ChainSender(rts[0])
    s, batch, qc = sender.propose(txs("a"))
    rx = ChainReceiver(0, 4, 16)
    rx.offer(s, batch, qc, backend, 3)
    other = type(batch)(0, 1, txs("other"))
    assert rx.offer(1, other, qc, backend, 3) == []
    assert rx.evidence and rx.evidence[0][0] == "equivocation"


def test_malformed_proposals_ignored():
    backend, rts = chain_setup()
    rx = ChainReceiver(0, 4, 2)
    sender = ChainSender(rts[0])
    s, batch, qc = sender.propose(txs("a", k=3))  # over the batch limit
    assert rx.offer(s, batch, qc, backend, 3) == []
    wrong_sender = type(batch)(1, 1, txs("b"))
    assert rx.offer(1, wrong_sender, qc, backend, 3) == []


@pytest.mark.parametrize("n", [4, 7])
def test_no_two_certified_digests_for_one_slot(n):
    """Each honest voter signs at most one of two conflicting batches;
    corrupt voters sign both. Over every split, at most one QC forms."""
    f = (n - 1) // 3
    q = n - f
    backend = MockBackend(n, 1)
    da, db = b"\x01" * 32, b"\x02" * 32
    honest = list(range(f, n))
    for mask in range(1 << len(honest)):
        side_a = [h for k, h in enumerate(honest) if mask >> k & 1]
        side_b = [h for h in honest if h not in side_a]
        a = qc_assemble((0, 1, da), _votes(backend, 0, 1, da, side_a + list(range(f))), Blocklist(), backend, q)
        b = qc_assemble((0, 1, db), _votes(backend, 0, 1, db, side_b + list(range(f))), Blocklist(), backend, q)
        assert a is None or b is None


# pulling missing batches

class PullNode:
    def __init__(self, rt, mode, kappa, rng, store):
        self.rt = rt
        self.store = store
        self.got = {}
        self.pull = PullService(rt, rng, mode, kappa, self.lookup, self.on_fetched)

    def lookup(self, key):
        b = self.store.get(key)
        return None if b is None else (b, None)

    def on_fetched(self, key, batch, extra):
        self.got[key] = batch


def pull_net(n, holders, batch, mode="random", kappa=1, seed=0, bad=(), lie=None):
    backend = MockBackend(n, seed)
    params = ProtocolParams(n)
    sim = Simulator(n, seed, trace=False)
    nodes = []
    for i in range(n):
        store = {}
        if i in holders:
            store["k"] = batch
        if i in bad and lie is not None:
            store["k"] = lie
        nd = PullNode(NodeRuntime(i, params, backend), mode, kappa, random.Random(f"{seed}-{i}"), store)
        sim.add_node(nd)
        nodes.append(nd)
    return sim, nodes


def make_batch(sender=1, slot=1, k=4, size=100):
    from abcast.core import Batch
    return Batch(sender, slot, [Transaction(bytes([i]) * size) for i in range(k)])


def test_kappa_n_always_succeeds():
    batch = make_batch()
    for seed in range(20):
        rng = random.Random(seed)
        holders = set(rng.sample(range(1, 7), 3))
        sim, nodes = pull_net(7, holders, batch, kappa=6, seed=seed)
        nodes[0].pull.request("k", batch.digest)
        sim.flush(0)
        sim.run()
        assert nodes[0].got["k"] == batch


def test_wrong_batch_is_dropped():
    batch = make_batch()
    lie = make_batch(k=2)
    sim, nodes = pull_net(4, {2}, batch, kappa=1, seed=5, bad={1, 3}, lie=lie)
    nodes[0].pull.request("k", batch.digest)
    sim.flush(0)
    sim.run()
    assert nodes[0].got["k"] == batch
    assert nodes[0].pull.fetched == 1


def test_first_wave_hit_rate_matches_hypergeometric():
    """kappa = 3 random asks at n = 7 when only f + 1 of the six peers hold
    the batch. The chance the first wave misses every holder is
    C(6 - 3, 3) / C(6, 3) = 1/20."""
    n, f, kappa, trials = 7, 2, 3, 2000
    holders = f + 1
    miss_p = math.comb(n - 1 - holders, kappa) / math.comb(n - 1, kappa)
    backend = MockBackend(n, 0)
    params = ProtocolParams(n, kappa=kappa)
    rng = random.Random(99)
    misses = 0
    for t in range(trials):
        rt = NodeRuntime(0, params, backend)
        held = set(rng.sample(range(1, n), holders))  # adversary's choice, unknown to the requester
        svc = PullService(rt, random.Random(t), "random", kappa, lambda k: None, lambda *a: None)
        svc.request("k", b"\x00" * 32)
        asked = {dst for dst, *_ in rt.drain()}
        assert len(asked) == kappa
        misses += not (asked & held)
    sd = math.sqrt(miss_p * (1 - miss_p) / trials)
    assert abs(misses / trials - miss_p) < 4 * sd
    assert 1 - misses / trials >= 1 - miss_p - 4 * sd


def test_misses_are_retried_until_found():
    batch = make_batch()
    for seed in range(30):
        sim, nodes = pull_net(7, {5}, batch, kappa=3, seed=seed)
        nodes[0].pull.request("k", batch.digest)
        sim.flush(0)
        sim.run()
        assert nodes[0].got.get("k") == batch


def test_dispersal_recovers_from_any_f_plus_one():
    batch = make_batch()
    for pair in itertools.combinations(range(1, 4), 2):
        sim, nodes = pull_net(4, set(pair), batch, mode="dispersal")
        nodes[0].pull.request("k", batch.digest)
        sim.flush(0)
        sim.run()
        assert nodes[0].got["k"] == batch


def test_dispersal_wrong_root_minority_never_decodes():
    batch = make_batch()
    lie = make_batch(k=1)
    # f = 2 liars agree on one wrong batch; they are below the f + 1 threshold
    sim, nodes = pull_net(7, {3, 4, 5}, batch, mode="dispersal", bad={1, 2}, lie=lie)
    nodes[0].pull.request("k", batch.digest)
    sim.flush(0)
    sim.run()
    assert nodes[0].got["k"] == batch


def test_dispersal_bytes_for_64k_batch():
    n, f = 7, 2
    batch = make_batch(k=64, size=1024)
    sim, nodes = pull_net(n, set(range(1, n)), batch, mode="dispersal")
    nodes[0].pull.request("k", batch.digest)
    sim.flush(0)
    sim.run()
    assert nodes[0].got["k"] == batch
    size = batch.wire_size
    per_responder = nodes[0].pull.bytes_received / (n - 1)
    # fragment share, padding, then the key, root, length and a Merkle path
    # of ceil(log2 n) framed digests
    overhead = 96 + 37 * math.ceil(math.log2(n))
    assert per_responder <= size / (f + 1) + overhead
    assert (f + 1) * per_responder <= 1.2 * size + n * overhead
