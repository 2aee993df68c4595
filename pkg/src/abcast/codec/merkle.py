"""Binary Merkle tree with separate leaf and interior hash domains."""

from __future__ import annotations

from dataclasses import dataclass

from ..core.hashing import hash_bytes

_EMPTY = hash_bytes(b"", "merkle-empty")


def leaf_hash(leaf: bytes) -> bytes:
    return hash_bytes(leaf, "merkle-leaf")


def node_hash(left: bytes, right: bytes) -> bytes:
    return hash_bytes(left + right, "merkle-node")


@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    path: tuple

    def to_wire(self):
        return (self.leaf_index, self.path)

    @property
    def wire_size(self) -> int:
        return 5 + 9 + 5 + 37 * len(self.path)


class MerkleTree:
    def __init__(self, leaves):
        leaves = list(leaves)
        if not leaves:
            raise ValueError("Merkle tree needs at least one leaf")
        self.size = len(leaves)
        level = [leaf_hash(x) for x in leaves]
        width = 1
        while width < len(level):
            width *= 2
        level += [_EMPTY] * (width - len(level))
        self.levels = [level]
        while len(level) > 1:
            level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
            self.levels.append(level)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def prove(self, index: int) -> MerkleProof:
        if not 0 <= index < self.size:
            raise IndexError(f"leaf index {index} out of range")
        path = []
        pos = index
        for level in self.levels[:-1]:
            path.append(level[pos ^ 1])
            pos //= 2
        return MerkleProof(index, tuple(path))


def merkle_root(leaves) -> bytes:
    return MerkleTree(leaves).root


def merkle_prove(leaves, index: int) -> MerkleProof:
    return MerkleTree(leaves).prove(index)


def merkle_verify(root: bytes, index: int, leaf: bytes, proof: MerkleProof, size: int | None = None) -> bool:
    if not isinstance(proof, MerkleProof) or proof.leaf_index != index or index < 0:
        return False
    if size is not None:
        if index >= size or len(proof.path) != max(size - 1, 0).bit_length():
            return False
    if index >> len(proof.path):
        return False
    acc = leaf_hash(leaf)
    pos = index
    for sibling in proof.path:
        if not isinstance(sibling, bytes):
            return False
        acc = node_hash(sibling, acc) if pos & 1 else node_hash(acc, sibling)
        pos //= 2
    return acc == root
