"""QC-chained slot broadcast.

Sender i proposes slot s together with the certificate of slot s - 1:

    PROP  (s, batch, qc_prev)     multicast by the sender
    VOTE  (s, sig)                to the sender, sig over qc_message((i, s, digest))

Once n - f votes aggregate into QC_s the sender may propose s + 1. A
receiver handles proposals of one sender strictly in slot order, parking
early ones, and only accepts slot s when QC_{s-1} is valid. Whether it then
votes is up to its owner (the fairness gate may hold the vote).
"""

from __future__ import annotations

from ..core.hashing import ZERO_DIGEST
from ..core.types import Batch
from ..crypto.qc import genesis_qc, qc_assemble, qc_message, qc_reject_reason

SESSION = ("qc",)

# proposals further than this ahead of the last accepted slot are dropped
PARK_WINDOW = 64


class ChainSender:
    """Proposer side of one node's own chain."""

    def __init__(self, rt):
        self.rt = rt
        self.slot = 0
        self.batch = None
        self.votes: dict = {}
        self.qc_prev = genesis_qc(rt.id, rt.n)
        self.certified = 0  # highest slot with a QC
        self.published = 0  # slot of the QC carried by the latest proposal

    def can_propose(self) -> bool:
        return self.certified == self.slot

    def propose(self, txs) -> tuple:
        assert self.can_propose(), "previous slot is not certified yet"
        self.slot += 1
        self.batch = Batch(self.rt.id, self.slot, txs)
        self.votes = {}
        self.published = self.slot - 1
        body = (self.slot, self.batch, self.qc_prev)
        self.rt.multicast(SESSION, "PROP", body, self.qc_prev.auth_size)
        return body

    def on_vote(self, src: int, s, sig):
        """Returns the new QC once n - f good votes are in, else None."""
        if s != self.slot or self.certified == self.slot or src in self.votes or not isinstance(sig, bytes):
            return None
        self.votes[src] = sig
        if len(self.votes) < self.rt.quorum:
            return None
        rt = self.rt
        mid = (rt.id, self.slot, self.batch.digest)
        qc = qc_assemble(mid, self.votes, rt.blocklist, rt.backend, rt.quorum, rt.verify_stats)
        if qc is None:
            return None
        self.qc_prev = qc
        self.certified = self.slot
        return qc


class ChainReceiver:
    """Observer side for one sender's chain.

    ``batches`` holds accepted (not necessarily certified) batches by slot and
    ``qcs`` every verified certificate seen for this chain.
    """

    def __init__(self, sender: int, n: int, batch_limit: int):
        self.sender = sender
        self.n = n
        self.batch_limit = batch_limit
        self.accepted = 0
        self.batches: dict = {}
        self.qcs: dict = {0: genesis_qc(sender, n)}
        self.parked: dict = {}
        self.evidence: list = []

    def well_formed(self, s, batch) -> bool:
        return (
            type(s) is int and s >= 1 and isinstance(batch, Batch)
            and batch.sender == self.sender and batch.slot == s and len(batch.txs) <= self.batch_limit
        )

    def offer(self, s, batch, qc, backend, quorum) -> list:
        """Feed a proposal. Returns the proposals accepted as a result, in
        slot order, as (slot, batch, qc_prev) triples."""
        if not self.well_formed(s, batch):
            return []
        if s <= self.accepted:
            mine = self.batches.get(s)
            if mine is not None and mine.digest != batch.digest:
                self.evidence.append(("equivocation", s, mine.digest, batch.digest))
            return []
        if s > self.accepted + 1:
            if s <= self.accepted + PARK_WINDOW:
                self.parked.setdefault(s, (batch, qc))
            return []
        out = []
        while True:
            if not self._accept(s, batch, qc, backend, quorum):
                break
            out.append((s, batch, qc))
            s += 1
            nxt = self.parked.pop(s, None)
            if nxt is None:
                break
            batch, qc = nxt
        return out

    def _accept(self, s, batch, qc, backend, quorum) -> bool:
        prev = s - 1
        if prev == 0:
            expected = (self.sender, 0, ZERO_DIGEST)
        else:
            mid = getattr(qc, "message_id", None)
            if not isinstance(mid, tuple) or len(mid) != 3:
                return False
            expected = (self.sender, prev, mid[2])
        if qc_reject_reason(qc, expected, backend, quorum) is not None:
            return False
        if prev > 0:
            mine = self.batches.get(prev)
            if mine is not None and mine.digest != expected[2]:
                # we voted for a different batch than the one certified
                self.evidence.append(("certified-other", prev, mine.digest, expected[2]))
            self.qcs[prev] = qc
        self.batches[s] = batch
        self.accepted = s
        return True

    def certified_digest(self, s):
        qc = self.qcs.get(s)
        return None if qc is None else qc.message_id[2]


def vote_message(sender: int, s: int, digest: bytes) -> bytes:
    return qc_message((sender, s, digest))
