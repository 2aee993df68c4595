"""Plumbing shared by both atomic broadcast nodes: the transaction buffer,
block plans waiting on batches, ledger emission and early-message parking."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..core.types import LedgerBlock, Transaction, flatten_block

# messages for epochs this far ahead of ours are dropped instead of parked
EARLY_WINDOW = 16


class SafetyViolation(AssertionError):
    """Two honest ledgers disagree at some height."""


class PrefixChecker:
    """Shared oracle: the first honest block seen at each height becomes the
    reference every later one must match."""

    def __init__(self):
        self.reference: dict = {}
        self.blocks = 0

    def check(self, node_id: int, block: LedgerBlock) -> None:
        self.blocks += 1
        ref = self.reference.setdefault(block.height, (node_id, block.digest))
        if ref[1] != block.digest:
            raise SafetyViolation(f"node {node_id} block {block.height} differs from node {ref[0]}'s")


@dataclass
class NodeOptions:
    pull_mode: str = "random"
    eager_pull: bool = False
    abandon: bool = True
    fairness: bool = True
    strict_validation: bool = False
    aggregate_vectors: bool = True
    dispersal: bool = True


@dataclass
class BlockPlan:
    epoch: int
    ranges: tuple  # ((sender, first, last), ...)
    keys: list


class BaseNode:
    """Owns one runtime. Subclasses fill ``self.values`` and queue plans."""

    protocol = "base"

    def __init__(self, rt, options: NodeOptions, rng, adversarial=frozenset(), observer=None):
        self.rt = rt
        self.me = rt.id
        self.n = rt.n
        self.f = rt.f
        self.params = rt.params
        self.opts = options
        self.rng = rng
        self.adversarial = frozenset(adversarial)
        self.observer = observer
        self.buffer: dict = {}  # payload -> Transaction, insertion ordered
        self.committed: set = set()
        self.ledger: list = []
        self.plans: deque = deque()
        self.values: dict = {}
        self.epoch = 1
        self.early: dict = {}
        self.saturate = False
        self.tx_factory = None
        self.censor = None  # adversarial input hook used by the quality strategy
        rt.fallback = self._fallback

    # transactions

    def submit(self, tx: Transaction) -> None:
        if tx.payload in self.committed or tx.payload in self.buffer:
            return
        self.buffer[tx.payload] = tx
        self.on_new_tx()

    def on_new_tx(self) -> None:
        pass

    def has_work(self) -> bool:
        return bool(self.buffer) or self.saturate

    def take_batch(self) -> list:
        limit = self.params.batch_limit
        if self.saturate and self.tx_factory is not None:
            while len(self.buffer) < limit:
                tx = self.tx_factory(self.me)
                self.buffer[tx.payload] = tx
        out = []
        for payload in list(self.buffer)[:limit]:
            out.append(self.buffer.pop(payload))
        return out

    # early messages for future epochs

    def _fallback(self, src, kind, session, body) -> None:
        if not isinstance(session, tuple) or len(session) < 2:
            return
        e = session[1]
        if isinstance(e, int) and self.epoch < e <= self.epoch + EARLY_WINDOW:
            self.early.setdefault(e, []).append((src, kind, session, body))

    def replay_early(self, e: int) -> None:
        for src, kind, session, body in self.early.pop(e, ()):
            self.rt.deliver(src, kind, session, body)

    # ledger

    def queue_plan(self, plan: BlockPlan) -> None:
        self.plans.append(plan)
        self.request_missing(plan)
        self.try_emit()

    def request_missing(self, plan: BlockPlan) -> None:
        raise NotImplementedError

    def try_emit(self) -> None:
        values = self.values
        while self.plans:
            plan = self.plans[0]
            if any(k not in values for k in plan.keys):
                return
            self.plans.popleft()
            batches = [values[k] for k in plan.keys]
            txs = flatten_block(batches)
            honest = sum(len(b.txs) for b in batches if b.sender not in self.adversarial)
            block = LedgerBlock.build(len(self.ledger), plan.epoch, plan.ranges, txs, honest)
            self.ledger.append(block)
            for t in txs:
                self.committed.add(t.payload)
                self.buffer.pop(t.payload, None)
            if self.observer is not None:
                self.observer(self, block)
            self.after_block(block)

    def after_block(self, block) -> None:
        pass
