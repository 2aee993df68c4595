from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .encoding import encode, size_of
from .hashing import hash_bytes


class Transaction:
    """Opaque client payload. Equality is by payload, which embeds a unique id."""

    __slots__ = ("payload", "client_tag")

    def __init__(self, payload: bytes, client_tag: int = 0):
        self.payload = payload
        self.client_tag = client_tag

    def to_wire(self):
        return (self.payload, self.client_tag)

    @property
    def wire_size(self) -> int:
        return 5 + 5 + len(self.payload) + 9

    @property
    def digest(self) -> bytes:
        return hash_bytes(self.payload, "tx")

    def __eq__(self, other):
        return isinstance(other, Transaction) and other.payload == self.payload

    def __hash__(self):
        return hash(self.payload)

    def __repr__(self):
        return f"Transaction({self.payload[:8].hex()}..., tag={self.client_tag})"


class Batch:
    """Transactions one sender disseminates in one broadcast slot."""

    __slots__ = ("sender", "slot", "txs", "wire_size", "_digest")

    def __init__(self, sender: int, slot: int, txs: Iterable[Transaction]):
        self.sender = sender
        self.slot = slot
        self.txs = tuple(txs)
        self.wire_size = 5 + 9 + 9 + 5 + sum(t.wire_size for t in self.txs)
        self._digest = None

    def to_wire(self):
        return (self.sender, self.slot, tuple(t.to_wire() for t in self.txs))

    @property
    def digest(self) -> bytes:
        if self._digest is None:
            self._digest = hash_bytes(encode(self.to_wire()), "batch")
        return self._digest

    @classmethod
    def from_wire(cls, wire) -> "Batch":
        sender, slot, txs = wire
        return cls(sender, slot, (Transaction(p, t) for p, t in txs))

    def __eq__(self, other):
        return isinstance(other, Batch) and self.digest == other.digest

    def __hash__(self):
        return hash(self.digest)

    def __repr__(self):
        return f"Batch(sender={self.sender}, slot={self.slot}, txs={len(self.txs)})"


class Envelope:
    """One point-to-point message plus its accounting metadata."""

    __slots__ = ("src", "dst", "kind", "session", "body", "size_bytes", "auth_bytes", "sent_at", "epoch", "status")

    def __init__(self, src, dst, kind, session, body, size_bytes, auth_bytes=0, epoch=0):
        self.src = src
        self.dst = dst
        self.kind = kind
        self.session = session
        self.body = body
        self.size_bytes = size_bytes
        self.auth_bytes = auth_bytes
        self.sent_at = 0.0
        self.epoch = epoch
        self.status = 0  # simulator bookkeeping: 0 in flight, 1 held, 2 retracted

    def to_wire(self):
        return (self.src, self.dst, self.kind, self.session, self.body)

    def __repr__(self):
        return f"Envelope({self.src}->{self.dst} {self.kind} {self.session})"


def envelope_size(kind: str, session: tuple, body) -> int:
    # u16 src + u16 dst, then the encoded kind, session and body
    return 4 + 5 + len(kind) + size_of(session) + size_of(body)


class MissingBatches(LookupError):
    def __init__(self, missing):
        super().__init__(f"{len(missing)} solicited batches not available locally")
        self.missing = tuple(missing)


def flatten_block(batches: Iterable[Batch], required=None) -> list[Transaction]:
    """Order transactions by (sender, slot, position in batch).

    If ``required`` lists (sender, slot) keys, every one must be present or
    MissingBatches is raised so the caller can pull them first.
    """
    by_key = {(b.sender, b.slot): b for b in batches}
    if required is not None:
        missing = [k for k in required if k not in by_key]
        if missing:
            raise MissingBatches(missing)
    out: list[Transaction] = []
    for key in sorted(by_key):
        out.extend(by_key[key].txs)
    return out


@dataclass(frozen=True)
class LedgerBlock:
    height: int
    epoch: int
    solicited: tuple  # ((sender, first_slot, last_slot), ...), inclusive ranges
    txs: tuple
    honest_count: int = 0
    digest: bytes = field(default=b"", compare=False)

    @classmethod
    def build(cls, height, epoch, solicited, txs, honest_count=0) -> "LedgerBlock":
        solicited = tuple(tuple(r) for r in solicited)
        txs = tuple(txs)
        body = (height, epoch, solicited, tuple(t.payload for t in txs))
        return cls(height, epoch, solicited, txs, honest_count, hash_bytes(encode(body), "block"))

    def record(self) -> dict:
        return {
            "height": self.height,
            "epoch": self.epoch,
            "ranges": [list(r) for r in self.solicited],
            "txs": [t.digest.hex() for t in self.txs],
            "digest": self.digest.hex(),
        }
