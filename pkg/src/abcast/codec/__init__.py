"""Erasure coding and Merkle commitments."""

from .merkle import MerkleProof, MerkleTree, leaf_hash, merkle_prove, merkle_root, merkle_verify
from .rs import CodeWord, InsufficientShards, rs_decode, rs_encode

__all__ = [
    "CodeWord",
    "InsufficientShards",
    "MerkleProof",
    "MerkleTree",
    "leaf_hash",
    "merkle_prove",
    "merkle_root",
    "merkle_verify",
    "rs_decode",
    "rs_encode",
]
