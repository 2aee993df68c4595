"""A bare network of DispersalMvba instances, with optional garbage senders."""

from __future__ import annotations

from abcast.apdb import DispersalMvba
from abcast.broadcast import ACCEPT, REJECT
from abcast.codec import MerkleTree, rs_encode

from harness import network


def accept_ok(value):
    return ACCEPT if value.startswith(b"ok") else REJECT


def garbage_disperse(att, payload, auth):
    """Commit to a word that is not a codeword: flip one byte of one shard
    before building the Merkle tree. Proofs stay valid, so honest nodes
    sign and the sender still gets a lock."""
    ow = att.owner
    cw = rs_encode(payload, ow.f + 1, ow.n)
    shards = list(cw.shards)
    shards[-1] = bytes([shards[-1][0] ^ 0xFF]) + shards[-1][1:]
    tree = MerkleTree(shards)
    att.my_root = tree.root
    att.my_length = len(payload)
    for j in range(ow.n):
        ow.rt.send(j, att.pd_session, "STORE", (tree.root, shards[j], tree.prove(j).path, len(payload)))


def run_dispersal(n, seed, inputs, garbage=(), epoch=0, predicate=accept_ok, crashed=()):
    sim, hosts, backend = network(n, seed)
    for c in crashed:
        sim.crash(c)
    decided = {}
    dms = []
    for h in hosts:
        dm = DispersalMvba(h.rt, epoch, bytes, bytes, predicate, lambda d, v: decided.setdefault(d.me, v))
        h.rt.fallback = dm.park
        if h.rt.id in garbage:
            for att in dm.attempts.values():
                att.disperse = garbage_disperse.__get__(att)
            _patch_future_attempts(dm)
        dms.append(dm)
    for i, dm in enumerate(dms):
        if i not in crashed:
            dm.start(inputs[i])
            sim.flush(i)
    sim.run()
    return sim, dms, decided


def _patch_future_attempts(dm):
    original = dm._open

    def _open(a):
        original(a)
        att = dm.attempts[a]
        att.disperse = garbage_disperse.__get__(att)

    dm._open = _open
