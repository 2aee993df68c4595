"""Client transaction injection.

Every tick the generator creates ``rate`` transactions and hands each to
``kappa`` distinct nodes chosen uniformly at random. A payload is the
8-byte little-endian transaction id padded with zeros to ``tx_size``.
"""

from __future__ import annotations

from ..core.types import Transaction


def make_payload(tx_id: int, tx_size: int, tag: bytes = b"") -> bytes:
    head = tx_id.to_bytes(8, "little") + tag
    if len(head) > tx_size:
        raise ValueError(f"tx_size {tx_size} too small for a {len(head)}-byte header")
    return head + bytes(tx_size - len(head))


class ClientLoad:
    def __init__(self, sim, nodes, rate: float, kappa: int, tx_size: int, active, interval: float = 1.0):
        if not 1 <= kappa <= len(nodes):
            raise ValueError(f"kappa must be in [1, {len(nodes)}]")
        self.sim = sim
        self.nodes = nodes
        self.rate = rate
        self.kappa = kappa
        self.tx_size = tx_size
        self.active = active  # callable: keep injecting?
        self.interval = interval
        self.next_id = 0
        self.routes: dict = {}  # payload -> recipients
        self._carry = 0.0

    def start(self) -> None:
        if self.rate > 0:
            self.sim.call_at(self.sim.now, self._tick)

    def _tick(self) -> None:
        if not self.active():
            return
        self._carry += self.rate * self.interval
        count = int(self._carry)
        self._carry -= count
        sim = self.sim
        n = len(self.nodes)
        touched = set()
        for _ in range(count):
            payload = make_payload(self.next_id, self.tx_size)
            self.next_id += 1
            tx = Transaction(payload)
            dsts = sorted(sim.rng.sample(range(n), self.kappa))
            self.routes[payload] = dsts
            for d in dsts:
                self.nodes[d].submit(tx)
                touched.add(d)
        for d in sorted(touched):
            sim.flush(d)
        sim.call_at(sim.now + self.interval, self._tick)


class SaturatingSource:
    """Endless distinct transactions for nodes that always fill batches."""

    def __init__(self, tx_size: int, tag: bytes):
        self.tx_size = tx_size
        self.tag = tag
        self.count = 0

    def __call__(self, node_id: int) -> Transaction:
        self.count += 1
        return Transaction(make_payload(self.count, self.tx_size, self.tag + node_id.to_bytes(2, "little")))
