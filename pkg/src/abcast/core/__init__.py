"""Shared types, parameters, hashing and the canonical wire encoding."""

from .encoding import EncodingError, decode, encode, size_of
from .hashing import DIGEST_SIZE, ZERO_DIGEST, check_digest, hash_bytes
from .params import ProtocolParams, derive_fault_bound, quorum_size
from .types import (
    Batch,
    Envelope,
    LedgerBlock,
    MissingBatches,
    Transaction,
    envelope_size,
    flatten_block,
)

__all__ = [
    "Batch",
    "DIGEST_SIZE",
    "EncodingError",
    "Envelope",
    "LedgerBlock",
    "MissingBatches",
    "ProtocolParams",
    "Transaction",
    "ZERO_DIGEST",
    "check_digest",
    "decode",
    "derive_fault_bound",
    "encode",
    "envelope_size",
    "flatten_block",
    "hash_bytes",
    "quorum_size",
    "size_of",
]
