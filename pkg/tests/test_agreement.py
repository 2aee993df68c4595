import random
import statistics

import pytest

from abcast.agreement import FinMvba, Raba
from abcast.broadcast import ACCEPT, PENDING, REJECT
from abcast.simnet.quality import expected_success, run_attacked_session

from harness import network

RB = ("rb",)


class RabaNode:
    def __init__(self, rt, backend):
        self.rt = rt
        self.raba = Raba(self, ("raba", 0), rt.id, rt.n, rt.f, backend)
        self.out = []
        rt.register(RB, self)

    def raba_multicast(self, raba, kind, rr, payload):
        self.rt.multicast(RB, kind, (rr, payload))

    def raba_decided(self, raba, bit):
        self.out.append(bit)

    def handle(self, src, kind, body):
        rr, payload = body
        self.raba.handle(kind, src, rr, payload)


def raba_net(n, seed, crashed=()):
    sim, hosts, backend = network(n, seed)
    nodes = []
    for h in hosts:
        nd = RabaNode(h.rt, backend)
        sim.nodes[h.rt.id] = nd
        nodes.append(nd)
    for c in crashed:
        sim.crash(c)
    return sim, nodes


def _run(sim, nodes, bits, repropose_at=None):
    for nd, b in zip(nodes, bits):
        if b is not None:
            nd.raba.propose(b)
            sim.flush(nd.rt.id)
    if repropose_at:
        for i, t in repropose_at.items():
            def go(i=i):
                nodes[i].raba.repropose()
                sim.flush(i)
            sim.call_at(t, go)
    sim.run()


def test_all_ones_decide_in_first_round():
    sim, nodes = raba_net(4, 1)
    _run(sim, nodes, [1, 1, 1, 1])
    for nd in nodes:
        assert nd.out == [1] and nd.raba.decided_round == 1


def test_all_zeros_decide_zero():
    for seed in range(20):
        sim, nodes = raba_net(4, seed)
        _run(sim, nodes, [0, 0, 0, 0])
        assert all(nd.out == [0] for nd in nodes)


@pytest.mark.parametrize("seed", range(80))
def test_biased_validity_with_late_repropose(seed):
    """f + 1 honest nodes propose 1; the rest propose 0 and later upgrade."""
    n, f = 4, 1
    rng = random.Random(seed)
    ones = set(rng.sample(range(n), f + 1))
    bits = [1 if i in ones else 0 for i in range(n)]
    late = {i: rng.uniform(0, 6) for i in range(n) if i not in ones}
    sim, nodes = raba_net(n, seed)
    _run(sim, nodes, bits, late)
    assert all(nd.out == [1] for nd in nodes)


@pytest.mark.parametrize("n", [4, 7])
def test_agreement_on_mixed_inputs_with_crashes(n):
    """Mixed proposals under the usage contract: when any honest node
    proposed 1, the 0-proposers repropose at some later point (inside the
    MVBA this is totality of the broadcast filling H[k])."""
    f = (n - 1) // 3
    for seed in range(40):
        rng = random.Random(seed)
        crashed = set(rng.sample(range(n), f))
        sim, nodes = raba_net(n, seed, crashed)
        bits = [None if i in crashed else rng.randint(0, 1) for i in range(n)]
        late = {}
        if 1 in bits:
            late = {i: rng.uniform(0, 8) for i, b in enumerate(bits) if b == 0}
        _run(sim, nodes, bits, late)
        outs = {nd.out[0] for i, nd in enumerate(nodes) if i not in crashed}
        assert len(outs) == 1
        honest_bits = {b for b in bits if b is not None}
        if len(honest_bits) == 1:
            assert outs == honest_bits
        if sum(b == 1 for b in bits if b is not None) >= f + 1:
            assert outs == {1}


def test_round_one_never_amplifies_zero():
    """Without f + 1 ones or a repropose, a minority of 0 votes cannot fill
    a round-1 bin, so nobody decides 0 behind a 1-proposer's back."""
    sim, nodes = raba_net(4, 1, crashed={1})
    _run(sim, nodes, [0, None, 1, 0])
    assert all(nd.out == [] for nd in nodes)
    for i in (0, 3):
        nodes[i].raba.repropose()
        sim.flush(i)
    sim.run()
    assert all(nodes[i].out == [1] for i in (0, 2, 3))


def test_usage_contract_enforced():
    sim, nodes = raba_net(4, 0)
    r = nodes[0].raba
    with pytest.raises(AssertionError):
        r.repropose()
    r.propose(1)
    with pytest.raises(AssertionError):
        r.repropose()
    with pytest.raises(AssertionError):
        r.propose(0)


def test_garbage_messages_ignored():
    sim, nodes = raba_net(4, 3)
    sim.corrupt(3)
    for kind, payload in (("BVAL", 7), ("AUX", "x"), ("COIN", b"junk"), ("DECIDE", 0)):
        nodes[3].rt.multicast(RB, kind, (1, payload))
    sim.flush(3)
    _run(sim, nodes, [1, 1, 1, None])
    assert all(nd.out == [1] for nd in nodes[:3])


# MVBA

SESSION = ("ag", 0)


def mvba_net(n, seed, inputs, predicate=None, abandon=True, crashed=()):
    sim, hosts, backend = network(n, seed)
    for c in crashed:
        sim.crash(c)
    mvbas = []
    for h in hosts:
        m = FinMvba(h.rt, SESSION, predicate, abandon)
        mvbas.append(m)
    for i, m in enumerate(mvbas):
        if i not in crashed:
            m.start(inputs[i])
            sim.flush(i)
    return sim, mvbas


def test_identical_inputs_decide_that_value():
    sim, mvbas = mvba_net(4, 0, [b"v"] * 4)
    sim.run()
    assert all(m.decided == b"v" for m in mvbas)


@pytest.mark.parametrize("n", [4, 7, 10])
def test_agreement_and_external_validity(n):
    f = (n - 1) // 3

    def pred(value):
        return ACCEPT if value.startswith(b"ok") else REJECT

    for seed in range(15):
        rng = random.Random(seed)
        crashed = set(rng.sample(range(n), rng.randint(0, f)))
        inputs = [b"ok-%d" % i if rng.random() < 0.7 else b"bad-%d" % i for i in range(n)]
        for i in range(f + 1):  # enough valid inputs to finish n - f instances
            inputs[(seed + i) % n] = b"ok-%d" % i
        if sum(inputs[i].startswith(b"ok") for i in range(n) if i not in crashed) < n - f:
            continue
        sim, mvbas = mvba_net(n, seed, inputs, pred, crashed=crashed)
        sim.run()
        decided = {m.decided for i, m in enumerate(mvbas) if i not in crashed}
        assert len(decided) == 1
        (value,) = decided
        assert pred(value) == ACCEPT


def test_pending_predicate_released_by_state_change():
    state = {"ready": False}

    def pred(value):
        return ACCEPT if state["ready"] else PENDING

    sim, mvbas = mvba_net(4, 2, [b"a", b"b", b"c", b"d"], pred)
    sim.run()
    assert not any(m.has_decided for m in mvbas)
    state["ready"] = True
    for i, m in enumerate(mvbas):
        m.reevaluate()
        sim.flush(i)
    sim.run()
    assert len({m.decided for m in mvbas}) == 1 and mvbas[0].has_decided


def test_abandon_issued_after_quorum_of_finished():
    sim, mvbas = mvba_net(4, 5, [b"a", b"b", b"c", b"d"])
    sim.run()
    for m in mvbas:
        assert m.abandoned and sum(m.F) >= 3
        assert all(inst.ban for inst in m.rbcs)


def test_mean_iterations_with_crashes_n7():
    n, f = 7, 2
    iters = []
    for seed in range(60):
        crashed = set(random.Random(seed).sample(range(n), f))
        sim, mvbas = mvba_net(n, seed, [b"x%d" % i for i in range(n)], crashed=crashed)
        sim.run()
        honest = [m for i, m in enumerate(mvbas) if i not in crashed]
        assert len({m.decided for m in honest}) == 1
        iters.append(honest[0].decided_round + 1)
    assert statistics.mean(iters) <= 1.5


def test_value_with_wrong_hash_is_dropped():
    sim, mvbas = mvba_net(4, 1, [b"a", b"b", b"c", b"d"])
    m = mvbas[0]
    m.handle(3, "VALUE", (0, b"forged"))
    sim.run()
    assert m.decided != b"forged"
    m.handle(2, "VALUE", "not a tuple")  # malformed bodies are ignored


# the quality attack harness on a handful of sessions

def test_attacked_session_keeps_agreement():
    for seed in range(10):
        out = run_attacked_session(7, seed, abandon=True, to_completion=True)
        assert out.agreement


def test_finite_n_model_values():
    assert expected_success(7, abandon=False) == pytest.approx(3 / 7)
    assert expected_success(10, abandon=False) == pytest.approx(5 / 10)
    assert expected_success(7, abandon=True) == pytest.approx(1 / 5)
    assert expected_success(10, abandon=True) == pytest.approx(2 / 7)
