"""Provable dispersal and reconstruction.

A sender erasure-codes its value into n fragments (any f + 1 recover it),
commits to them with a Merkle root and hands fragment j to node j. Node j
checks the proof, keeps the fragment and signs (instance, root, length).
2f + 1 such signatures form a lock: proof that enough honest nodes hold
fragments for the value to be recovered later.

Reconstruction gathers f + 1 fragments under a locked root, decodes,
re-encodes and recomputes the root. A mismatch means the sender committed
to something that is not a codeword, and every honest node then outputs
the same failure marker instead of a value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..codec.merkle import MerkleProof, MerkleTree, merkle_verify
from ..codec.rs import InsufficientShards, rs_decode, rs_encode
from ..core.encoding import size_of
from ..crypto.qc import QuorumCert, qc_assemble, qc_message, qc_reject_reason

BOTTOM = None  # recast failure marker


def lock_threshold(f: int) -> int:
    return 2 * f + 1


@dataclass(frozen=True)
class Store:
    root: bytes
    index: int
    fragment: bytes
    proof: tuple  # sibling digests
    length: int

    def to_wire(self):
        return (self.root, self.fragment, self.proof, self.length)

    @property
    def wire_size(self) -> int:
        return size_of(self.to_wire())

    def valid(self, n: int) -> bool:
        return merkle_verify(self.root, self.index, self.fragment, MerkleProof(self.index, tuple(self.proof)), n)


@dataclass(frozen=True)
class Lock:
    instance: tuple  # (session, sender)
    root: bytes
    length: int
    cert: QuorumCert

    @property
    def message_id(self) -> tuple:
        return (self.instance, self.root, self.length)

    @property
    def sender(self) -> int:
        return self.instance[1]

    def to_wire(self):
        return (self.instance, self.root, self.length, self.cert)

    @property
    def wire_size(self) -> int:
        return 5 + size_of(self.instance) + 5 + len(self.root) + 9 + self.cert.wire_size

    @property
    def auth_size(self) -> int:
        return self.cert.auth_size


def disperse(payload: bytes, n: int, f: int) -> list[Store]:
    """One Store per node for ``payload``."""
    cw = rs_encode(payload, f + 1, n)
    tree = MerkleTree(cw.shards)
    root = tree.root
    return [Store(root, j, cw.shards[j], tree.prove(j).path, len(payload)) for j in range(n)]


def stored_message(instance: tuple, root: bytes, length: int) -> bytes:
    return qc_message((instance, root, length))


def sign_store(backend, signer: int, instance: tuple, store: Store) -> bytes:
    return backend.sign(signer, stored_message(instance, store.root, store.length))


def assemble_lock(instance, root, length, sigs: dict, blocklist, backend, f: int, stats=None) -> Lock | None:
    mid = (instance, root, length)
    qc = qc_assemble(mid, sigs, blocklist, backend, lock_threshold(f), stats)
    if qc is None:
        return None
    return Lock(instance, root, length, qc)


def validate_lock(lock, backend, f: int, instance: tuple | None = None) -> bool:
    if not isinstance(lock, Lock) or not isinstance(lock.root, bytes) or type(lock.length) is not int:
        return False
    if instance is not None and tuple(lock.instance) != tuple(instance):
        return False
    return qc_reject_reason(lock.cert, lock.message_id, backend, lock_threshold(f)) is None


def recover(fragments: dict, root: bytes, length: int, n: int, f: int):
    """Decode from >= f + 1 fragments and run the re-encode check.

    Returns the payload, or BOTTOM when the fragments under ``root`` are not
    a codeword of any payload.
    """
    k = f + 1
    if len(fragments) < k:
        raise InsufficientShards(f"need {k} fragments, have {len(fragments)}")
    chosen = sorted(fragments.items())[:k]
    try:
        payload = rs_decode(chosen, k, n, length)
    except (InsufficientShards, ValueError):
        return BOTTOM
    again = rs_encode(payload, k, n) if payload else None
    if again is None or MerkleTree(again.shards).root != root:
        return BOTTOM
    return payload


def fragment_auth(store_size: int, value_size: int, value_auth: int) -> int:
    """Authenticator bytes carried by one fragment, pro rata to the value."""
    if value_size <= 0:
        return 0
    return math.ceil(store_size * value_auth / value_size)
