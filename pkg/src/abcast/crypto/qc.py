"""Quorum certificates: assembly with batch verification and a blocklist,
verification, and cross-message aggregation of QC vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from ..core.encoding import encode, size_of
from ..core.hashing import ZERO_DIGEST
from .backends import SignatureBackend


@lru_cache(maxsize=1 << 16)
def _qc_message_cached(message_id: tuple) -> bytes:
    return encode(("qc",) + message_id)


def qc_message(message_id: tuple) -> bytes:
    message_id = tuple(message_id)
    try:
        return _qc_message_cached(message_id)
    except TypeError:  # unhashable parts
        return encode(("qc",) + message_id)


@dataclass(frozen=True)
class SignerBitmap:
    n: int
    bits: int = 0

    @classmethod
    def of(cls, n: int, signers) -> "SignerBitmap":
        bits = 0
        for i in signers:
            if not 0 <= i < n:
                raise ValueError(f"signer {i} out of range for n={n}")
            bits |= 1 << i
        return cls(n, bits)

    def indices(self) -> list[int]:
        return [i for i in range(self.n) if self.bits >> i & 1]

    def popcount(self) -> int:
        return bin(self.bits).count("1")

    def flip(self, j: int) -> "SignerBitmap":
        return SignerBitmap(self.n, self.bits ^ (1 << j))

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes((self.n + 7) // 8, "little")

    @property
    def byte_len(self) -> int:
        return (self.n + 7) // 8


@dataclass(frozen=True)
class QuorumCert:
    message_id: tuple
    sig: object  # bytes when aggregated, tuple of bytes when concatenated
    signers: SignerBitmap

    def to_wire(self):
        return (self.message_id, self.sig, self.signers.to_bytes())

    @property
    def is_genesis(self) -> bool:
        return self.sig == b"" and self.signers.bits == 0

    @property
    def slot(self) -> int:
        return self.message_id[1]

    @property
    def wire_size(self) -> int:
        return 5 + _mid_size(self.message_id) + _sig_field_size(self.sig) + 5 + self.signers.byte_len

    @property
    def auth_size(self) -> int:
        return _sig_field_size(self.sig) + 5 + self.signers.byte_len


def _mid_size(mid) -> int:
    return size_of(mid)


def _sig_field_size(sig) -> int:
    if isinstance(sig, bytes):
        return 5 + len(sig)
    return 5 + sum(5 + len(s) for s in sig)


def genesis_qc(sender: int, n: int) -> QuorumCert:
    """Reserved placeholder standing in for the QC of slot 0."""
    return QuorumCert((sender, 0, ZERO_DIGEST), b"", SignerBitmap(n, 0))


@dataclass
class VerifyStats:
    batch_verifications: int = 0
    batch_failures: int = 0
    individual_verifications: int = 0


@dataclass
class Blocklist:
    banned: set = field(default_factory=set)
    evidence: dict = field(default_factory=dict)

    def add(self, node: int, message: bytes, sig) -> None:
        if node not in self.banned:
            self.banned.add(node)
            self.evidence[node] = (message, sig)

    def __contains__(self, node) -> bool:
        return node in self.banned

    def __len__(self) -> int:
        return len(self.banned)


def qc_assemble(
    message_id: tuple,
    shares: dict,
    blocklist: Blocklist,
    backend: SignatureBackend,
    threshold: int,
    stats: VerifyStats | None = None,
    message: bytes | None = None,
) -> QuorumCert | None:
    """Aggregate-then-verify. Returns None while fewer than ``threshold``
    good shares are available (the caller keeps collecting)."""
    stats = stats if stats is not None else VerifyStats()
    msg = message if message is not None else qc_message(message_id)
    eligible = {i: s for i, s in shares.items() if i not in blocklist}
    if len(eligible) < threshold:
        return None
    n = backend.n
    if backend.aggregatable:
        agg = backend.aggregate([eligible[i] for i in sorted(eligible)])
        stats.batch_verifications += 1
        if backend.verify_aggregate([(msg, sorted(eligible))], agg):
            return QuorumCert(tuple(message_id), agg, SignerBitmap.of(n, eligible))
        stats.batch_failures += 1
    good = {}
    for i in sorted(eligible):
        stats.individual_verifications += 1
        if backend.verify(i, msg, eligible[i]):
            good[i] = eligible[i]
        else:
            blocklist.add(i, msg, eligible[i])
    if len(good) < threshold:
        return None
    return QuorumCert(tuple(message_id), backend.combine(msg, good), SignerBitmap.of(n, good))


def qc_reject_reason(
    qc: QuorumCert,
    expected_id: tuple,
    backend: SignatureBackend,
    threshold: int,
    message: bytes | None = None,
) -> str | None:
    """None when the QC is acceptable, otherwise a short reason."""
    if not isinstance(qc, QuorumCert) or not isinstance(qc.signers, SignerBitmap):
        return "malformed"
    if tuple(qc.message_id) != tuple(expected_id):
        return "wrong-message"
    if qc.signers.n != backend.n or qc.signers.bits >> backend.n:
        return "bad-quorum-size"
    if qc.is_genesis:
        if len(expected_id) == 3 and expected_id[1] == 0 and expected_id[2] == ZERO_DIGEST:
            return None
        return "bad-quorum-size"
    if qc.signers.popcount() < threshold:
        return "bad-quorum-size"
    msg = message if message is not None else qc_message(qc.message_id)
    if not backend.verify_combined(msg, qc.signers.indices(), qc.sig):
        return "bad-signature"
    return None


def qc_verify(qc, expected_id, backend, threshold, message=None) -> bool:
    return qc_reject_reason(qc, expected_id, backend, threshold, message) is None


@dataclass(frozen=True)
class AggregatedQCVector:
    entries: tuple  # ((message_id, SignerBitmap), ...)
    agg_sig: bytes

    def to_wire(self):
        return (tuple((mid, bm.to_bytes()) for mid, bm in self.entries), self.agg_sig)

    @property
    def wire_size(self) -> int:
        inner = 5 + sum(5 + _mid_size(mid) + 5 + bm.byte_len for mid, bm in self.entries)
        return 5 + inner + 5 + len(self.agg_sig)

    @property
    def auth_size(self) -> int:
        return 5 + len(self.agg_sig) + sum(5 + bm.byte_len for _, bm in self.entries)

    def slots(self) -> list[int]:
        return [mid[1] for mid, _ in self.entries]


def qc_vector_aggregate(qcs, backend: SignatureBackend) -> AggregatedQCVector:
    if not backend.aggregatable:
        raise TypeError(f"{backend.scheme} cannot aggregate across messages")
    qcs = list(qcs)
    entries = tuple((q.message_id, q.signers) for q in qcs)
    sigs = [q.sig for q in qcs if not q.is_genesis]
    if len(sigs) == 1:
        return AggregatedQCVector(entries, sigs[0])
    return AggregatedQCVector(entries, backend.aggregate(sigs) if sigs else b"")


def qc_vector_reject_reason(agg: AggregatedQCVector, backend: SignatureBackend, threshold: int) -> str | None:
    if not isinstance(agg, AggregatedQCVector) or not agg.entries:
        return "bad-quorum-size"
    items = []
    for mid, bm in agg.entries:
        if not isinstance(bm, SignerBitmap) or bm.n != backend.n:
            return "bad-quorum-size"
        if bm.bits == 0 and len(mid) == 3 and mid[1] == 0 and mid[2] == ZERO_DIGEST:
            continue  # genesis placeholder carries no signature
        if bm.popcount() < threshold:
            return "bad-quorum-size"
        items.append((qc_message(mid), bm.indices()))
    if not items:
        return None if agg.agg_sig == b"" else "bad-aggregate"
    if not backend.verify_aggregate(items, agg.agg_sig):
        return "bad-aggregate"
    return None


def qc_vector_verify(agg, backend, threshold) -> bool:
    return qc_vector_reject_reason(agg, backend, threshold) is None


def auth_size_of(value) -> int:
    """Authenticator bytes carried by a QC, an aggregated vector or a plain
    tuple of QCs; anything else carries none."""
    size = getattr(value, "auth_size", None)
    if size is not None:
        return size
    if isinstance(value, (tuple, list)):
        return sum(auth_size_of(v) for v in value)
    return 0


def compact_qc_bytes(qc: QuorumCert) -> bytes:
    """Fixed-width layout: digest, signer bitmap, then the signature(s).
    Sender and slot are positional in a proposal vector, so they are left
    to the enclosing value."""
    sig = qc.sig if isinstance(qc.sig, bytes) else b"".join(qc.sig)
    return qc.message_id[2] + qc.signers.to_bytes() + sig


def compact_vector_bytes(agg: AggregatedQCVector) -> bytes:
    """The same layout for an aggregated vector: every (digest, bitmap)
    pair followed by the single aggregate signature."""
    return b"".join(mid[2] + bm.to_bytes() for mid, bm in agg.entries) + agg.agg_sig


def concatenated_sig_bytes(qcs) -> int:
    """Signature bytes of the plain concatenated form of a QC list."""
    total = 0
    for q in qcs:
        if isinstance(q.sig, bytes):
            total += len(q.sig)
        else:
            total += sum(len(s) for s in q.sig)
    return total
