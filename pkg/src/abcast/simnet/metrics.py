"""Per-epoch traffic and commit accounting.

The simulator calls ``account`` for every honest message that crosses the
network; self-deliveries never do. Traffic is charged to the epoch the
sender was in when it sent. Commit columns come from ``on_block``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

CSV_VERSION = "# abcast-metrics v1"

COLUMNS = (
    "epoch", "commit_time", "rounds", "txs", "unique_new_txs", "honest_fraction",
    "bytes", "auth_bytes", "qc_bytes", "messages", "node_bytes",
)

# sessions whose authenticators are the agreement path's certificates
QC_SESSIONS = frozenset(("ag", "ji", "pd"))
COIN_KINDS = frozenset(("ELECT", "COIN"))


@dataclass
class EpochRow:
    epoch: int
    bytes: int = 0
    auth_bytes: int = 0
    qc_bytes: int = 0
    messages: int = 0
    node_bytes: list = field(default_factory=list)
    commit_time: float | None = None
    rounds: float | None = None
    txs: int = 0
    unique_new_txs: int = 0
    honest_fraction: float | None = None

    def as_csv(self) -> list:
        def fmt(x):
            return "" if x is None else (f"{x:.6f}" if isinstance(x, float) else str(x))

        return [
            self.epoch, fmt(self.commit_time), fmt(self.rounds), self.txs, self.unique_new_txs,
            fmt(self.honest_fraction), self.bytes, self.auth_bytes, self.qc_bytes, self.messages,
            ";".join(str(b) for b in self.node_bytes),
        ]


class Metrics:
    def __init__(self, n: int):
        self.n = n
        self.rows: dict = {}
        self.by_session: dict = {}  # session prefix -> [bytes, auth, messages]
        self.seen: set = set()
        self.committed_heights: dict = {}  # height -> nodes that emitted it
        self.recorded: set = set()
        self.last_commit = 0.0

    def row(self, epoch: int) -> EpochRow:
        r = self.rows.get(epoch)
        if r is None:
            r = self.rows[epoch] = EpochRow(epoch, node_bytes=[0] * self.n)
        return r

    def account(self, env) -> None:
        r = self.row(env.epoch)
        size = env.size_bytes
        r.bytes += size
        r.auth_bytes += env.auth_bytes
        r.messages += 1
        r.node_bytes[env.src] += size
        prefix = env.session[0] if env.session else ""
        if prefix in QC_SESSIONS and env.kind not in COIN_KINDS:
            r.qc_bytes += env.auth_bytes
        acc = self.by_session.setdefault(prefix, [0, 0, 0])
        acc[0] += size
        acc[1] += env.auth_bytes
        acc[2] += 1

    def on_block(self, node_id: int, block, now: float, honest: frozenset, unit: float) -> None:
        """Record a block once every honest node has emitted it."""
        nodes = self.committed_heights.setdefault(block.height, set())
        nodes.add(node_id)
        if block.height in self.recorded or not honest <= nodes:
            return
        self.recorded.add(block.height)
        r = self.row(block.epoch)
        r.commit_time = now
        r.rounds = (now - self.last_commit) / unit if unit > 0 else None
        self.last_commit = now
        r.txs = len(block.txs)
        fresh = 0
        for t in block.txs:
            if t.payload not in self.seen:
                self.seen.add(t.payload)
                fresh += 1
        r.unique_new_txs = fresh
        r.honest_fraction = block.honest_count / r.txs if r.txs else None

    def ordered_rows(self) -> list:
        return [self.rows[e] for e in sorted(self.rows)]

    def committed_rows(self) -> list:
        return [r for r in self.ordered_rows() if r.commit_time is not None]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_VERSION + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.ordered_rows():
            w.writerow(r.as_csv())
        return buf.getvalue()


def read_metrics_csv(text: str) -> list[dict]:
    lines = text.splitlines()
    if not lines or lines[0] != CSV_VERSION:
        raise ValueError("missing or unsupported metrics header")
    return list(csv.DictReader(lines[1:]))
