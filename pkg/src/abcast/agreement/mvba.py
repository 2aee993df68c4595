"""Quality-optimal signature-free MVBA.

Every node broadcasts its input through an abandonable validated weak RBC.
A node that wr-delivers instance j announces FIN(j, h); n - f matching
FINs mark j finished. Once n - f instances are finished the node abandons
all instances (so late values can no longer gather echoes) and then
repeatedly elects a random instance and runs binary agreement on whether
to output it.

Wire format inside one session (the session tuple routes the message):

    VAL     value                 ECHO/READY/FIN  (j, digest)
    ELECT   (r, coin share)       BVAL/AUX/COIN   (r, raba_round, payload)
    DECIDE  (r, 0, bit)           VALUE           (r, value)
"""

from __future__ import annotations

from ..broadcast.rbc import ACCEPT, PENDING, REJECT, WeakRBC, value_digest
from ..crypto.coin import CoinCollector
from ..crypto.qc import auth_size_of
from .raba import Raba


class FinMvba:
    def __init__(self, rt, session: tuple, predicate=None, abandon: bool = True, on_decide=None):
        self.rt = rt
        self.session = session
        self.me = rt.id
        self.n = rt.n
        self.f = rt.f
        self.quorum = rt.quorum
        self.backend = rt.backend
        self.predicate = predicate
        self.abandon_enabled = abandon
        self.on_decide = on_decide
        self.rbcs = [WeakRBC(self, j, j, self.quorum, self.f, predicate) for j in range(self.n)]
        self.H: list = [None] * self.n
        self.V: list = [None] * self.n
        self.F = [False] * self.n
        self.finished = 0
        self.fin_seen: set = set()  # (sender, j)
        self.fin_count: dict = {}
        self.abandoned = False
        self.input = None
        self.round = -1
        self.elected: dict = {}
        self.elections: dict = {}
        self.rabas: dict = {}
        self.awaiting_h = None  # round whose RABA said 1 but H[k] is still empty
        self.awaiting_value = None
        self.value_sent = False
        self.values: dict = {}  # sender -> (r, value), at most one per sender
        self.decided = None
        self.decided_round = None
        self.has_decided = False
        rt.register(session, self)

    # local interface

    def start(self, value) -> None:
        assert self.input is None, "session already has an input"
        self.input = value
        self.rt.multicast(self.session, "VAL", value, auth_size_of(value))

    def reevaluate(self) -> None:
        for inst in self.rbcs:
            if inst.pending is not None:
                inst.reevaluate()

    # rbc host callbacks

    def rbc_send(self, inst, kind, digest) -> None:
        self.rt.multicast(self.session, kind, (inst.sender, digest))

    def rbc_wr_deliver(self, inst, digest) -> None:
        j = inst.sender
        if self.H[j] is None:
            self._set_h(j, digest)
        self.rt.multicast(self.session, "FIN", (j, digest))

    def rbc_r_deliver(self, inst, value) -> None:
        self.V[inst.sender] = value
        if self.awaiting_value is not None and self.elected.get(self.awaiting_value) == inst.sender:
            self._finish(self.awaiting_value)

    # message dispatch

    def handle(self, src: int, kind: str, body) -> None:
        try:
            if kind == "ECHO":
                j, h = body
                self.rbcs[j].on_echo(src, h)
            elif kind == "READY":
                j, h = body
                self.rbcs[j].on_ready(src, h)
            elif kind == "FIN":
                self._on_fin(src, *body)
            elif kind == "VAL":
                self.rbcs[src].on_val(src, body)
            elif kind in ("BVAL", "AUX", "COIN", "DECIDE"):
                r, rr, payload = body
                self._raba(r).handle(kind, src, rr, payload)
            elif kind == "ELECT":
                r, share = body
                self._on_elect(src, r, share)
            elif kind == "VALUE":
                r, value = body
                self._on_value(src, r, value)
        except (TypeError, ValueError, IndexError):
            return  # malformed body from a faulty peer

    def _set_h(self, j, digest) -> None:
        self.H[j] = digest
        for r, k in self.elected.items():
            if k != j:
                continue
            raba = self.rabas.get(r)
            if raba is not None and raba.proposed == 0 and not raba.reproposed:
                raba.repropose()
        if self.awaiting_h is not None and self.elected.get(self.awaiting_h) == j:
            r = self.awaiting_h
            self.awaiting_h = None
            self._diffuse(r)

    def _on_fin(self, src, j, digest) -> None:
        if not 0 <= j < self.n or (src, j) in self.fin_seen:
            return
        self.fin_seen.add((src, j))
        key = (j, digest)
        c = self.fin_count.get(key, 0) + 1
        self.fin_count[key] = c
        if c >= self.quorum and not self.F[j]:
            self.F[j] = True
            if self.H[j] is None:
                self._set_h(j, digest)
            self.finished += 1
            if self.finished == self.quorum:
                if self.abandon_enabled:
                    self.abandoned = True
                    for inst in self.rbcs:
                        inst.abandon()
                self._enter_round(0)

    # election and agreement loop

    def _enter_round(self, r: int) -> None:
        self.round = r
        cc = self._election(r)
        share = self.backend.coin_share(self.me, cc.tag_bytes)
        self.rt.multicast(self.session, "ELECT", (r, share), self.backend.coin_share_size)
        if cc.value is not None:
            self._elected(r, cc.value)

    def _election(self, r) -> CoinCollector:
        cc = self.elections.get(r)
        if cc is None:
            cc = self.elections[r] = CoinCollector(self.backend, self.session + ("elect", r), self.n, self.quorum)
        return cc

    def _on_elect(self, src, r, share) -> None:
        if not isinstance(r, int) or r < 0 or not isinstance(share, bytes):
            return
        cc = self._election(r)
        if cc.value is None and cc.add(src, share) is not None and r == self.round:
            self._elected(r, cc.value)

    def _elected(self, r, k) -> None:
        if r in self.elected:
            return
        self.elected[r] = k
        raba = self._raba(r)
        if raba.proposed is None:
            raba.propose(1 if self.H[k] is not None else 0)
        if raba.decided is not None:
            self._raba_output(r, raba.decided)

    def _raba(self, r) -> Raba:
        raba = self.rabas.get(r)
        if raba is None:
            raba = self.rabas[r] = Raba(self, self.session + ("raba", r), self.me, self.n, self.f, self.backend)
            raba.mvba_round = r
        return raba

    def raba_multicast(self, raba, kind, rr, payload) -> None:
        auth = self.backend.coin_share_size if kind == "COIN" else 0
        self.rt.multicast(self.session, kind, (raba.mvba_round, rr, payload), auth)

    def raba_decided(self, raba, bit) -> None:
        r = raba.mvba_round
        if r == self.round and r in self.elected:
            self._raba_output(r, bit)

    def _raba_output(self, r, bit) -> None:
        if self.has_decided or r != self.round:
            return
        if bit == 1:
            if self.H[self.elected[r]] is None:
                self.awaiting_h = r
            else:
                self._diffuse(r)
        else:
            self._enter_round(r + 1)

    def _diffuse(self, r) -> None:
        k = self.elected[r]
        if self.V[k] is not None:
            if not self.value_sent:
                self.value_sent = True
                self.rt.multicast(self.session, "VALUE", (r, self.V[k]), auth_size_of(self.V[k]))
            self._finish(r)
            return
        self.awaiting_value = r
        want = self.H[k]
        for _, value in self.values.values():
            if value_digest(value) == want:
                self._adopt(r, value)
                return

    def _on_value(self, src, r, value) -> None:
        if src in self.values:
            return
        if len(self.values) >= self.n:
            return
        self.values[src] = (r, value)
        if self.awaiting_value is not None and not self.has_decided:
            k = self.elected[self.awaiting_value]
            if value_digest(value) == self.H[k]:
                self._adopt(self.awaiting_value, value)

    def _adopt(self, r, value) -> None:
        self.V[self.elected[r]] = value
        self._finish(r)

    def _finish(self, r) -> None:
        if self.has_decided:
            return
        self.has_decided = True
        self.awaiting_value = None
        self.decided = self.V[self.elected[r]]
        self.decided_round = r
        if self.on_decide is not None:
            self.on_decide(self, self.decided)


__all__ = ["FinMvba", "ACCEPT", "PENDING", "REJECT"]
