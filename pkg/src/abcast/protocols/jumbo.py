"""JUMBO: QC-chained broadcast plus dispersal-based epoch agreement.

Each node runs its own QC chain. ``current[j]`` is the highest slot of
chain j for which this node holds a verified QC. Epoch e agrees on a vector
of n QCs: a snapshot of ``current`` (capped for fairness), serialized as one
aggregated QC vector when the backend allows it. The winning vector becomes
``ordered`` and the block packs every slot between the old and new vector.

Fairness: with delta_j = current_j - ordered_j and delta the (f+1)-th
smallest of all delta_j, a node holds its vote on chain j while
beta * delta_j >= delta and delta_j > 0, and rejects proposals whose largest
delta exceeds delta / beta.
"""

from __future__ import annotations

from fractions import Fraction

from ..agreement.mvba import FinMvba
from ..apdb.dmvba import DispersalMvba
from ..broadcast.chain import SESSION, ChainReceiver, ChainSender, vote_message
from ..broadcast.pull import PullService
from ..broadcast.rbc import ACCEPT, PENDING, REJECT
from ..core.encoding import decode, encode
from ..core.hashing import ZERO_DIGEST
from ..crypto.qc import (
    AggregatedQCVector,
    QuorumCert,
    SignerBitmap,
    qc_reject_reason,
    qc_vector_aggregate,
    qc_vector_reject_reason,
)
from .base import BaseNode, BlockPlan


def vector_entries(value) -> list | None:
    """(message_id, signer bitmap) per chain, or None if malformed."""
    if isinstance(value, AggregatedQCVector):
        return [(tuple(mid), bm) for mid, bm in value.entries]
    if isinstance(value, tuple) and all(isinstance(q, QuorumCert) for q in value):
        return [(tuple(q.message_id), q.signers) for q in value]
    return None


def encode_vector(value) -> bytes:
    if isinstance(value, AggregatedQCVector):
        return encode(("A", value.to_wire()))
    return encode(("C", tuple(q.to_wire() for q in value)))


def decode_vector(data: bytes, n: int):
    tag, body = decode(data)
    width = (n + 7) // 8

    def bitmap(raw):
        if not isinstance(raw, bytes) or len(raw) != width:
            raise ValueError("bad bitmap")
        return SignerBitmap(n, int.from_bytes(raw, "little"))

    if tag == "A":
        entries, agg = body
        return AggregatedQCVector(tuple((tuple(mid), bitmap(bm)) for mid, bm in entries), agg)
    if tag == "C":
        return tuple(QuorumCert(tuple(mid), sig, bitmap(bm)) for mid, sig, bm in body)
    raise ValueError("unknown vector tag")


def fairness_delta(deltas, f: int) -> int:
    """The (f+1)-th smallest progress delta."""
    return sorted(deltas)[f]


def gate_holds(beta: Fraction, delta_j: int, delta: int) -> bool:
    return delta_j > 0 and beta * delta_j >= delta


def jumbo_predicate(value, ordered, backend, quorum: int, f: int, beta: Fraction | None, held=None) -> str:
    """Validity of an epoch proposal against the last ordered slots.

    ``beta`` None disables the fairness ratio check. ``held(j, slot, digest)``
    (strict mode) must confirm the batch is held locally, else Pending.
    """
    n = len(ordered)
    entries = vector_entries(value)
    if entries is None or len(entries) != n:
        return REJECT
    slots = []
    for j, (mid, bm) in enumerate(entries):
        if len(mid) != 3 or mid[0] != j or type(mid[1]) is not int or not isinstance(mid[2], bytes):
            return REJECT
        slots.append(mid[1])
    increases = 0
    for s, o in zip(slots, ordered):
        if s < o:
            return REJECT
        if s > o:
            increases += 1
    if increases < quorum:
        return REJECT
    if beta is not None:
        deltas = [s - o for s, o in zip(slots, ordered)]
        if beta * max(deltas) > fairness_delta(deltas, f):
            return REJECT
    if isinstance(value, AggregatedQCVector):
        if qc_vector_reject_reason(value, backend, quorum) is not None:
            return REJECT
    else:
        for q in value:
            if qc_reject_reason(q, q.message_id, backend, quorum) is not None:
                return REJECT
    if held is not None:
        for (mid, _), o in zip(entries, ordered):
            if mid[1] > o and not held(mid[0], mid[1], mid[2]):
                return PENDING
    return ACCEPT


class JumboNode(BaseNode):
    protocol = "jumbo"

    def __init__(self, rt, options, rng, adversarial=frozenset(), observer=None):
        super().__init__(rt, options, rng, adversarial, observer)
        n = self.n
        self.sender = ChainSender(rt)
        self.chains = [ChainReceiver(j, n, self.params.batch_limit) for j in range(n)]
        self.current = [0] * n
        self.ordered = [0] * n
        self.cert: dict = {}  # (j, slot) -> certified digest
        self.held: dict = {}  # chain -> slot whose vote the gate holds
        self.beta = Fraction(str(self.params.beta))
        self.agreements: dict = {}
        self.needed: set = set()
        self.gate_holds_total = 0
        rt.register(SESSION, self)
        mode = options.pull_mode
        self.pull = PullService(rt, rng, mode, self.params.kappa, self._lookup, self._fetched)
        self._open_epoch()

    def start(self) -> None:
        self.maybe_propose()
        self.maybe_start_epoch()

    # own chain

    def maybe_propose(self) -> None:
        snd = self.sender
        if not snd.can_propose():
            return
        if not self.has_work() and self.ordered[self.me] < snd.published:
            return  # nothing to carry: our last published QC is not ordered yet
        snd.propose(self.take_batch())

    def on_new_tx(self) -> None:
        self.maybe_propose()

    def handle(self, src, kind, body) -> None:
        try:
            if kind == "PROP":
                s, batch, qc = body
                accepted = self.chains[src].offer(s, batch, qc, self.rt.backend, self.rt.quorum)
                for s, batch, qc in accepted:
                    self._accepted(src, s, batch, qc)
            elif kind == "VOTE":
                s, sig = body
                if self.sender.on_vote(src, s, sig) is not None:
                    self.maybe_propose()
        except (TypeError, ValueError):
            return

    def _accepted(self, j, s, batch, qc_prev) -> None:
        if s > 1:
            self._certify(j, s - 1, qc_prev.message_id[2])
        if self.cert.get((j, s)) == batch.digest:
            self._store((j, s), batch)
        if s - 1 > self.current[j]:
            self.current[j] = s - 1
            self._progress_changed()
        if self.opts.fairness and self._gate(j):
            self.held[j] = s
            self.gate_holds_total += 1
        else:
            self.held.pop(j, None)
            self._vote(j, s)

    def _vote(self, j, s) -> None:
        batch = self.chains[j].batches[s]
        sig = self.rt.backend.sign(self.me, vote_message(j, s, batch.digest))
        self.rt.send(j, SESSION, "VOTE", (s, sig), len(sig) + 5)

    def _gate(self, j) -> bool:
        deltas = [max(0, c - o) for c, o in zip(self.current, self.ordered)]
        return gate_holds(self.beta, deltas[j], fairness_delta(deltas, self.f))

    def _reopen_gates(self) -> None:
        if not self.held:
            return
        for j in sorted(self.held):
            s = self.held[j]
            if s == self.chains[j].accepted and not self._gate(j):
                del self.held[j]
                self._vote(j, s)

    def _progress_changed(self) -> None:
        self._reopen_gates()
        agreement = self.agreements.get(self.epoch)
        if agreement is not None and self.opts.strict_validation:
            agreement.reevaluate()
        self.maybe_start_epoch()

    def _certify(self, j, s, digest) -> None:
        key = (j, s)
        if key in self.cert:
            return
        self.cert[key] = digest
        batch = self.chains[j].batches.get(s)
        if batch is not None and batch.digest == digest:
            self._store(key, batch)
        elif key in self.needed:
            self._pull(key)

    def _store(self, key, batch) -> None:
        if key in self.values:
            return
        self.values[key] = batch
        self.needed.discard(key)
        pkey = ("q",) + key
        self.pull.cancel(pkey)
        self.pull.now_holding(pkey)
        self.try_emit()

    # pulls

    def _pull(self, key) -> None:
        j, s = key
        digest = self.cert.get(key)

        def validate(batch, extra, j=j, s=s):
            if batch.sender != j or batch.slot != s:
                return False
            known = self.cert.get((j, s))
            if known is not None:
                return batch.digest == known
            return qc_reject_reason(extra, (j, s, batch.digest), self.rt.backend, self.rt.quorum) is None

        self.pull.request(("q", j, s), digest, validate)

    def _lookup(self, pkey):
        if not isinstance(pkey, tuple) or len(pkey) != 3 or pkey[0] != "q":
            return None
        key = (pkey[1], pkey[2])
        batch = self.values.get(key)
        if batch is None:
            return None
        chain = self.chains[key[0]] if 0 <= key[0] < self.n else None
        return batch, (chain.qcs.get(key[1]) if chain is not None else None)

    def _fetched(self, pkey, batch, extra) -> None:
        j, s = pkey[1], pkey[2]
        if (j, s) not in self.cert:
            self.cert[(j, s)] = batch.digest
        self._store((j, s), batch)

    def request_missing(self, plan) -> None:
        for key in plan.keys:
            if key in self.values:
                continue
            batch = self.chains[key[0]].batches.get(key[1])
            if batch is not None and batch.digest == self.cert.get(key):
                self._store(key, batch)
                continue
            self.needed.add(key)
            self._pull(key)

    # epochs

    def _fallback(self, src, kind, session, body) -> None:
        if isinstance(session, tuple) and len(session) == 3 and session[0] in ("pd", "ji") and session[1] == self.epoch:
            agreement = self.agreements.get(self.epoch)
            if isinstance(agreement, DispersalMvba):
                agreement.park(src, kind, session, body)
            return
        super()._fallback(src, kind, session, body)

    def _held_locally(self, j, s, digest) -> bool:
        batch = self.chains[j].batches.get(s)
        return batch is not None and batch.digest == digest

    def predicate(self, value) -> str:
        beta = self.beta if self.opts.fairness else None
        held = self._held_locally if self.opts.strict_validation else None
        return jumbo_predicate(value, self._ordered_at_open, self.rt.backend, self.rt.quorum, self.f, beta, held)

    def _open_epoch(self) -> None:
        e = self.epoch
        self.rt.epoch_tag = e
        self._ordered_at_open = tuple(self.ordered)
        if self.opts.dispersal:
            n = self.n
            agreement = DispersalMvba(
                self.rt, e, encode_vector, lambda data: decode_vector(data, n),
                self.predicate, self._decided, self.opts.abandon,
            )
        else:
            agreement = FinMvba(self.rt, ("ag", e), self.predicate, self.opts.abandon, self._decided)
        self.agreements[e] = agreement
        self.replay_early(e)

    def ready_to_propose(self) -> bool:
        return sum(1 for c, o in zip(self.current, self.ordered) if c > o) >= self.rt.quorum

    def snapshot(self):
        """Capped QC vector for this epoch, or None if a needed QC is missing."""
        deltas = [max(0, c - o) for c, o in zip(self.current, self.ordered)]
        cap = None
        if self.opts.fairness:
            cap = int(fairness_delta(deltas, self.f) / self.beta)
        qcs = []
        for j in range(self.n):
            d = deltas[j] if cap is None else min(deltas[j], cap)
            qc = self.chains[j].qcs.get(self.ordered[j] + d)
            if qc is None:
                return None
            qcs.append(qc)
        if self.opts.aggregate_vectors and self.rt.backend.aggregatable:
            return qc_vector_aggregate(qcs, self.rt.backend)
        return tuple(qcs)

    def maybe_start_epoch(self) -> None:
        agreement = self.agreements[self.epoch]
        if agreement.input is not None or agreement.has_decided or not self.ready_to_propose():
            return
        value = self.snapshot()
        if value is None:
            return
        if self.censor is not None:
            value = self.censor(self, value)
        agreement.start(value)

    def _decided(self, agreement, value) -> None:
        e = self.epoch
        if self.agreements.get(e) is not agreement:
            return
        entries = vector_entries(value)
        ranges = []
        keys = []
        for j, (mid, _) in enumerate(entries):
            lo, hi = self.ordered[j] + 1, mid[1]
            if hi >= lo:
                if hi > 0 and mid[2] != ZERO_DIGEST:
                    self.cert.setdefault((j, hi), mid[2])
                ranges.append((j, lo, hi))
                keys.extend((j, s) for s in range(lo, hi + 1))
        if isinstance(value, tuple):
            for q in value:
                self.chains[q.message_id[0]].qcs.setdefault(q.message_id[1], q)
        self.ordered = [mid[1] for mid, _ in entries]
        self.epoch = e + 1
        self._open_epoch()
        self.queue_plan(BlockPlan(e, tuple(ranges), keys))
        self.pull.nudge()
        self._reopen_gates()
        self.maybe_start_epoch()
        self.maybe_propose()
