"""Fetching batches a node knows the digest (or QC) of but never received.

Two modes share one requester:

* ``random``: ask kappa random peers for the full batch. Peers that lack
  it answer NACK, and each NACK (or bad answer) moves the request to one
  more peer, preferring peers known to hold it. ``nudge()`` widens stuck
  requests; owners call it on local progress events, not on timers.
* ``dispersal``: ask everyone; each holder answers with its own coded
  fragment plus a Merkle proof, and f + 1 fragments under one root are
  decoded and checked against the digest.

Messages travel in session ("pull",):

    PULL      (key, coded)
    PULLRESP  (key, batch_wire, extra)
    PULLNACK  (key,)
    PULLFRAG  (key, root, shard, proof_path, payload_len)
"""

from __future__ import annotations

from ..codec.merkle import MerkleProof, MerkleTree, merkle_verify
from ..codec.rs import rs_decode, rs_encode
from ..core.encoding import decode, encode, size_of
from ..core.types import Batch

SESSION = ("pull",)


class _Request:
    __slots__ = ("key", "digest", "validate", "asked", "frags", "bad_roots", "done", "coded")

    def __init__(self, key, digest, validate, coded):
        self.key = key
        self.digest = digest
        self.validate = validate
        self.asked: set = set()
        self.frags: dict = {}
        self.bad_roots: set = set()
        self.done = False
        self.coded = coded


class PullService:
    """Requester and responder halves for one node.

    ``lookup(key)`` returns (batch, extra) when the node can serve ``key``.
    ``on_fetched(key, batch, extra)`` receives every validated result.
    """

    def __init__(self, rt, rng, mode: str, kappa: int, lookup, on_fetched, holders_hint=None):
        if mode not in ("random", "dispersal"):
            raise ValueError(f"unknown pull mode {mode!r}")
        self.rt = rt
        self.rng = rng
        self.mode = mode
        self.kappa = kappa
        self.lookup = lookup
        self.on_fetched = on_fetched
        self.holders_hint = holders_hint
        self.open: dict = {}
        self.waiting: dict = {}  # key -> set of requesters we could not serve yet (coded mode)
        self._coded_cache: dict = {}
        self.fetched = 0
        self.bytes_received = 0  # encoded bodies of PULLRESP and PULLFRAG
        rt.register(SESSION, self)

    # requester

    def request(self, key, digest=None, validate=None) -> None:
        """Start fetching ``key``. ``validate(batch, extra)`` must return
        True only for the genuine batch; by default it compares digests."""
        if key in self.open:
            return
        coded = self.mode == "dispersal" and digest is not None
        req = _Request(key, digest, validate, coded)
        self.open[key] = req
        if coded:
            peers = [p for p in range(self.rt.n) if p != self.rt.id]
            req.asked.update(peers)
            self.rt.multicast(SESSION, "PULL", (key, True))
            return
        self._ask(req, self.kappa)

    def cancel(self, key) -> None:
        req = self.open.pop(key, None)
        if req is not None:
            req.done = True

    def _ask(self, req, count) -> None:
        me = self.rt.id
        hint = self.holders_hint(req.key) if self.holders_hint else ()
        fresh = [p for p in hint if p != me and p not in req.asked]
        others = [p for p in range(self.rt.n) if p != me and p not in req.asked and p not in fresh]
        self.rng.shuffle(fresh)
        self.rng.shuffle(others)
        for p in (fresh + others)[:count]:
            req.asked.add(p)
            self.rt.send(p, SESSION, "PULL", (req.key, False))

    def nudge(self) -> None:
        for req in list(self.open.values()):
            if not req.done and not req.coded:
                self._ask(req, self.kappa)

    def learned_holder(self, key, peer) -> None:
        req = self.open.get(key)
        if req is not None and not req.coded and peer not in req.asked and peer != self.rt.id:
            req.asked.add(peer)
            self.rt.send(peer, SESSION, "PULL", (key, False))

    def _accept(self, req, batch, extra) -> bool:
        if req.validate is not None:
            ok = req.validate(batch, extra)
        else:
            ok = batch.digest == req.digest
        if not ok:
            return False
        req.done = True
        del self.open[req.key]
        self.fetched += 1
        self.on_fetched(req.key, batch, extra)
        return True

    # message handling

    def handle(self, src, kind, body) -> None:
        try:
            if kind == "PULL":
                self._serve(src, *body)
            elif kind == "PULLRESP":
                self.bytes_received += size_of(body)
                self._on_resp(src, *body)
            elif kind == "PULLNACK":
                self._on_nack(src, body[0])
            elif kind == "PULLFRAG":
                self.bytes_received += size_of(body)
                self._on_frag(src, *body)
        except (TypeError, ValueError, IndexError, KeyError):
            return

    def _serve(self, src, key, coded) -> None:
        found = self.lookup(key)
        if found is None:
            if coded:
                self.waiting.setdefault(key, set()).add(src)
            else:
                self.rt.send(src, SESSION, "PULLNACK", (key,))
            return
        batch, extra = found
        if coded:
            self._send_fragment(src, key, batch)
        else:
            self.rt.send(src, SESSION, "PULLRESP", (key, batch, extra), getattr(extra, "auth_size", 0))

    def now_holding(self, key) -> None:
        """Serve coded requests that arrived before we had the batch."""
        waiting = self.waiting.pop(key, None)
        if waiting:
            found = self.lookup(key)
            if found is not None:
                for src in sorted(waiting):
                    self._send_fragment(src, key, found[0])

    def _send_fragment(self, dst, key, batch) -> None:
        cached = self._coded_cache.get(key)
        if cached is None:
            payload = encode(batch.to_wire())
            cw = rs_encode(payload, self.rt.f + 1, self.rt.n)
            tree = MerkleTree(cw.shards)
            cached = (tree, cw, len(payload))
            self._coded_cache[key] = cached
        tree, cw, length = cached
        me = self.rt.id
        proof = tree.prove(me)
        self.rt.send(dst, SESSION, "PULLFRAG", (key, tree.root, cw.shards[me], proof.path, length))

    def _on_resp(self, src, key, batch, extra) -> None:
        req = self.open.get(key)
        if req is None or req.coded:
            return
        if isinstance(batch, tuple):
            batch = Batch.from_wire(batch)
        if not isinstance(batch, Batch) or not self._accept(req, batch, extra):
            self._ask(req, 1)

    def _on_nack(self, src, key) -> None:
        req = self.open.get(key)
        if req is not None and not req.coded:
            self._ask(req, 1)

    def _on_frag(self, src, key, root, shard, path, length) -> None:
        req = self.open.get(key)
        if req is None or not req.coded or root in req.bad_roots:
            return
        proof = MerkleProof(src, tuple(path))
        if not merkle_verify(root, src, shard, proof, self.rt.n):
            return
        group = req.frags.setdefault(root, {})
        if src in group:
            return
        group[src] = shard
        k = self.rt.f + 1
        if len(group) < k:
            return
        try:
            payload = rs_decode(group.items(), k, self.rt.n, length)
            batch = Batch.from_wire(decode(payload))
        except Exception:
            req.bad_roots.add(root)
            req.frags.pop(root, None)
            return
        if not self._accept(req, batch, None):
            req.bad_roots.add(root)
            req.frags.pop(root, None)
