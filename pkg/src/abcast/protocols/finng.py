"""FIN-NG: signature-free atomic broadcast.

Every node runs a chain of weak reliable broadcasts, starting instance e + 1
once it wr-delivers its own instance e. ``current[j]`` is the highest index
up to which sender j's instances are contiguously wr-delivered. Epoch e
agrees on a new ``ordered`` vector with one MVBA session whose input is a
snapshot of ``current``; the block of epoch e packs every instance between
the old and the new ordered vector.

Broadcast messages travel in session ("bc",):

    VAL    (e, batch)         from the sender
    ECHO   (j, e, digest)     READY  (j, e, digest)

Epoch e's agreement runs in session ("ag", e).
"""

from __future__ import annotations

from ..agreement.mvba import FinMvba
from ..broadcast.pull import PullService
from ..broadcast.rbc import ACCEPT, PENDING, REJECT, WeakRBC
from ..core.types import Batch
from .base import BaseNode, BlockPlan

BC = ("bc",)


def finng_predicate(proposal, local_current, ordered, quorum: int) -> str:
    """Three-step validity of an epoch proposal.

    1. no entry shrinks below ``ordered``;
    2. at least ``quorum`` entries increase;
    3. wait until every entry is locally wr-delivered.
    """
    n = len(ordered)
    if not isinstance(proposal, tuple) or len(proposal) != n:
        return REJECT
    increases = 0
    for p, o in zip(proposal, ordered):
        if type(p) is not int or p < o:
            return REJECT
        if p > o:
            increases += 1
    if increases < quorum:
        return REJECT
    for p, c in zip(proposal, local_current):
        if p > c:
            return PENDING
    return ACCEPT


class FinNgNode(BaseNode):
    protocol = "fin-ng"

    def __init__(self, rt, options, rng, adversarial=frozenset(), observer=None):
        super().__init__(rt, options, rng, adversarial, observer)
        n = self.n
        self.insts: dict = {}
        self.digests = [dict() for _ in range(n)]
        self.current = [0] * n
        self.ordered = [0] * n
        self.mvbas: dict = {}
        self.needed: set = set()
        self.next_index = 1
        self.inflight = False
        self.epoch_started_at: dict = {}
        rt.register(BC, self)
        self.pull = PullService(rt, rng, options.pull_mode, self.params.kappa, self._lookup, self._fetched, self._holders)
        self._open_epoch()

    def start(self) -> None:
        self.maybe_broadcast()
        self.maybe_start_epoch()

    # broadcast chain

    def maybe_broadcast(self) -> None:
        if self.inflight:
            return
        me = self.me
        if not self.has_work() and self.current[me] > self.ordered[me]:
            return  # an empty instance is only needed when nothing of ours awaits ordering
        e = self.next_index
        self.inflight = True
        batch = Batch(me, e, self.take_batch())
        self.rt.multicast(BC, "VAL", (e, batch), 0)

    def on_new_tx(self) -> None:
        self.maybe_broadcast()

    def _inst(self, j: int, e: int) -> WeakRBC:
        key = (j, e)
        inst = self.insts.get(key)
        if inst is None:
            limit = self.params.batch_limit

            def valid(batch, j=j, e=e):
                ok = isinstance(batch, Batch) and batch.sender == j and batch.slot == e and len(batch.txs) <= limit
                return ACCEPT if ok else REJECT

            inst = self.insts[key] = WeakRBC(self, j, key, self.rt.quorum, self.f, valid)
        return inst

    def handle(self, src, kind, body) -> None:
        try:
            if kind == "VAL":
                e, batch = body
                if type(e) is int and e >= 1:
                    self._inst(src, e).on_val(src, batch)
            elif kind == "ECHO" or kind == "READY":
                j, e, h = body
                if type(j) is int and 0 <= j < self.n and type(e) is int and e >= 1 and type(h) is bytes:
                    inst = self._inst(j, e)
                    if kind == "ECHO":
                        inst.on_echo(src, h)
                        if ("w", j, e) in self.pull.open:
                            self.pull.learned_holder(("w", j, e), src)
                    else:
                        inst.on_ready(src, h)
        except (TypeError, ValueError):
            return

    def rbc_send(self, inst, kind, digest) -> None:
        j, e = inst.key
        self.rt.multicast(BC, kind, (j, e, digest))

    def rbc_wr_deliver(self, inst, digest) -> None:
        j, e = inst.key
        self.digests[j][e] = digest
        cur = self.current[j]
        advanced = False
        while cur + 1 in self.digests[j]:
            cur += 1
            advanced = True
        self.current[j] = cur
        if j == self.me and e == self.next_index:
            self.inflight = False
            self.next_index = e + 1
        key = (j, e)
        if key not in self.values and (key in self.needed or self.opts.eager_pull):
            self._pull(key)
        if advanced:
            mvba = self.mvbas.get(self.epoch)
            if mvba is not None:
                mvba.reevaluate()
            self.maybe_start_epoch()
        if j == self.me:
            self.maybe_broadcast()

    def rbc_r_deliver(self, inst, value) -> None:
        key = inst.key
        self._store(key, value)

    def _store(self, key, batch) -> None:
        if key in self.values:
            return
        self.values[key] = batch
        self.needed.discard(key)
        self.pull.cancel(("w",) + key)
        self.pull.now_holding(("w",) + key)
        self.try_emit()

    # pulls

    def _pull(self, key) -> None:
        h = self.digests[key[0]].get(key[1])
        if h is not None:
            self.pull.request(("w",) + key, h)

    def _lookup(self, pkey):
        if not isinstance(pkey, tuple) or len(pkey) != 3 or pkey[0] != "w":
            return None
        batch = self.values.get((pkey[1], pkey[2]))
        return None if batch is None else (batch, None)

    def _fetched(self, pkey, batch, extra) -> None:
        self._store((pkey[1], pkey[2]), batch)

    def _holders(self, pkey):
        inst = self.insts.get((pkey[1], pkey[2]))
        return sorted(inst.echo_from) if inst is not None else ()

    def request_missing(self, plan) -> None:
        for key in plan.keys:
            if key not in self.values:
                self.needed.add(key)
                self._pull(key)

    # epochs

    def _predicate(self, ordered):
        quorum = self.rt.quorum
        current = self.current  # live list, so Pending resolves as it grows
        return lambda proposal: finng_predicate(proposal, current, ordered, quorum)

    def _open_epoch(self) -> None:
        e = self.epoch
        self.rt.epoch_tag = e
        mvba = FinMvba(self.rt, ("ag", e), self._predicate(tuple(self.ordered)), self.opts.abandon, self._decided)
        self.mvbas[e] = mvba
        self.replay_early(e)

    def ready_to_propose(self) -> bool:
        quorum = self.rt.quorum
        return sum(1 for c, o in zip(self.current, self.ordered) if c > o) >= quorum

    def maybe_start_epoch(self) -> None:
        mvba = self.mvbas[self.epoch]
        if mvba.input is not None or mvba.has_decided or not self.ready_to_propose():
            return
        value = tuple(self.current)
        if self.censor is not None:
            value = self.censor(self, value)
        mvba.start(value)

    def restart_agreement(self, value) -> None:
        """Adversarial hook: rerun this epoch's session with another input."""
        e = self.epoch
        mvba = FinMvba(self.rt, ("ag", e), self._predicate(tuple(self.ordered)), self.opts.abandon, self._decided)
        self.mvbas[e] = mvba
        mvba.start(value)

    def _decided(self, mvba, value) -> None:
        e = mvba.session[1]
        if e != self.epoch or self.mvbas.get(e) is not mvba:
            return
        ranges = []
        keys = []
        for j in range(self.n):
            lo, hi = self.ordered[j] + 1, value[j]
            if hi >= lo:
                ranges.append((j, lo, hi))
                keys.extend((j, s) for s in range(lo, hi + 1))
        self.ordered = list(value)
        self.epoch = e + 1
        self._open_epoch()
        self.queue_plan(BlockPlan(e, tuple(ranges), keys))
        self.pull.nudge()
        self.maybe_start_epoch()
        self.maybe_broadcast()
