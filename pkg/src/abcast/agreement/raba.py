"""Reproposable binary agreement biased towards 1.

Rounds follow the binary-value broadcast / AUX / common-coin pattern with
n - f thresholds. Two changes give the bias:

* Round 1 uses the constant coin 1, and its BVAL phase only amplifies 1:
  a node re-broadcasts BVAL(1) after f + 1 of them, but 0 is never
  amplified there. So 0 can enter a round-1 bin only with n - 2f honest
  zero-voters, which is impossible once f + 1 honest nodes voted 1.
* ``repropose()`` adds a BVAL(1) while the node is still in round 1.
  Afterwards the estimate comes from the protocol itself, and a late
  repropose is a no-op. Callers only repropose when every honest node
  will eventually do the same, so round 1 still finishes.

A node that decides multicasts DECIDE; f + 1 matching DECIDEs let others
adopt the value, and n - f of them let a node stop participating.
"""

from __future__ import annotations

from ..crypto.coin import CoinCollector


class _Round:
    __slots__ = ("bval_sent", "bval_from", "bins", "aux_sent", "aux_from", "vals", "coin", "share_sent")

    def __init__(self):
        self.bval_sent: set = set()
        self.bval_from = (set(), set())  # senders per bit
        self.bins: list = []
        self.aux_sent = False
        self.aux_from: dict = {}
        self.vals = None
        self.coin = None
        self.share_sent = False


class Raba:
    def __init__(self, host, tag, node_id: int, n: int, f: int, backend):
        self.host = host
        self.tag = tuple(tag)
        self.me = node_id
        self.n = n
        self.f = f
        self.quorum = n - f
        self.backend = backend
        self.proposed = None
        self.reproposed = False
        self.round = 0
        self.est = None
        self.rounds: dict = {}
        self.decided = None
        self.decided_round = None
        self.decide_sent = False
        self.decide_from: dict = {}
        self.halted = False
        self._coins: dict = {}

    def _r(self, rr: int) -> _Round:
        st = self.rounds.get(rr)
        if st is None:
            st = self.rounds[rr] = _Round()
        return st

    # local interface

    def propose(self, bit: int) -> None:
        assert self.proposed is None, "propose called twice"
        assert bit in (0, 1)
        self.proposed = bit
        self.est = bit
        self._enter(1)

    def repropose(self) -> None:
        assert self.proposed is not None, "repropose before propose"
        assert self.proposed == 0 and not self.reproposed, "repropose only upgrades a 0 proposal once"
        self.reproposed = True
        if self.round == 1 and not self.halted:
            st = self._r(1)
            if st.vals is None and 1 not in st.bval_sent:
                self._bval(1, st, 1)

    # message handling

    def handle(self, kind: str, src: int, rr: int, payload) -> None:
        if self.halted:
            return
        if kind == "BVAL":
            self._on_bval(src, rr, payload)
        elif kind == "AUX":
            self._on_aux(src, rr, payload)
        elif kind == "COIN":
            self._on_coin(src, rr, payload)
        elif kind == "DECIDE":
            self._on_decide(src, payload)

    def _bval(self, rr, st, bit) -> None:
        st.bval_sent.add(bit)
        self.host.raba_multicast(self, "BVAL", rr, bit)

    def _enter(self, rr: int) -> None:
        self.round = rr
        st = self._r(rr)
        if self.est not in st.bval_sent:
            self._bval(rr, st, self.est)
        if self.reproposed and rr == 1 and 1 not in st.bval_sent:
            self._bval(rr, st, 1)
        if st.bins and not st.aux_sent:
            st.aux_sent = True
            self.host.raba_multicast(self, "AUX", rr, st.bins[0])
        self._progress(rr)

    def _on_bval(self, src, rr, bit) -> None:
        if bit not in (0, 1) or not isinstance(rr, int) or rr < 1:
            return
        st = self._r(rr)
        senders = st.bval_from[bit]
        if src in senders:
            return
        senders.add(src)
        c = len(senders)
        if c >= self.f + 1 and bit not in st.bval_sent and (rr > 1 or bit == 1):
            self._bval(rr, st, bit)
        if c >= self.quorum and bit not in st.bins:
            st.bins.append(bit)
            if rr == self.round and not st.aux_sent:
                st.aux_sent = True
                self.host.raba_multicast(self, "AUX", rr, bit)
            self._progress(rr)

    def _on_aux(self, src, rr, bit) -> None:
        if bit not in (0, 1) or not isinstance(rr, int) or rr < 1:
            return
        st = self._r(rr)
        if src in st.aux_from:
            return
        st.aux_from[src] = bit
        self._progress(rr)

    def _coin_collector(self, rr) -> CoinCollector:
        cc = self._coins.get(rr)
        if cc is None:
            cc = self._coins[rr] = CoinCollector(self.backend, self.tag + (rr,), 2, self.quorum)
        return cc

    def _on_coin(self, src, rr, share) -> None:
        if not isinstance(rr, int) or rr < 2 or not isinstance(share, bytes):
            return
        cc = self._coin_collector(rr)
        if cc.value is None and cc.add(src, share) is not None:
            self._progress(rr)

    def _progress(self, rr: int) -> None:
        if rr != self.round or self.halted:
            return
        st = self.rounds[rr]
        if st.vals is None:
            if not st.aux_sent:
                return
            bins = st.bins
            support = [b for b in st.aux_from.values() if b in bins]
            if len(support) < self.quorum:
                return
            st.vals = frozenset(support)
        if st.coin is None:
            if rr == 1:
                st.coin = 1
            else:
                if not st.share_sent:
                    st.share_sent = True
                    share = self.backend.coin_share(self.me, self._coin_collector(rr).tag_bytes)
                    self.host.raba_multicast(self, "COIN", rr, share)
                cc = self._coin_collector(rr)
                if cc.value is None:
                    return
                st.coin = cc.value
        coin = st.coin
        if len(st.vals) == 1:
            (v,) = st.vals
            if v == coin and self.decided is None:
                self._decide(v, rr)
            self.est = v
        else:
            self.est = coin
        self._enter(rr + 1)

    def _decide(self, bit: int, rr) -> None:
        self.decided = bit
        self.decided_round = rr
        if not self.decide_sent:
            self.decide_sent = True
            self.host.raba_multicast(self, "DECIDE", 0, bit)
        self.host.raba_decided(self, bit)

    def _on_decide(self, src, bit) -> None:
        if bit not in (0, 1):
            return
        senders = self.decide_from.setdefault(bit, set())
        if src in senders or any(src in s for s in self.decide_from.values()):
            return
        senders.add(src)
        c = len(senders)
        if c >= self.f + 1 and self.decided is None:
            self.est = bit
            self._decide(bit, None)
        if c >= self.quorum:
            self.halted = True
