"""Signature backends, quorum certificates and the threshold coin."""

from .backends import SCHEMES, BLSBackend, MockBackend, SignatureBackend, deal_bls_keys, make_backend
from .coin import CoinCollector, CoinShare, coin_assemble, coin_share, coin_tag_bytes, coin_value
from .keys import KeyMaterial, deal_keys, read_key_file, write_key_files
from .qc import (
    AggregatedQCVector,
    Blocklist,
    QuorumCert,
    SignerBitmap,
    VerifyStats,
    auth_size_of,
    compact_qc_bytes,
    compact_vector_bytes,
    concatenated_sig_bytes,
    genesis_qc,
    qc_assemble,
    qc_message,
    qc_reject_reason,
    qc_vector_aggregate,
    qc_vector_reject_reason,
    qc_vector_verify,
    qc_verify,
)

__all__ = [
    "AggregatedQCVector",
    "BLSBackend",
    "Blocklist",
    "CoinCollector",
    "CoinShare",
    "KeyMaterial",
    "MockBackend",
    "QuorumCert",
    "SCHEMES",
    "SignatureBackend",
    "SignerBitmap",
    "VerifyStats",
    "auth_size_of",
    "coin_assemble",
    "coin_share",
    "coin_tag_bytes",
    "coin_value",
    "compact_qc_bytes",
    "compact_vector_bytes",
    "concatenated_sig_bytes",
    "deal_bls_keys",
    "deal_keys",
    "genesis_qc",
    "make_backend",
    "qc_assemble",
    "qc_message",
    "qc_reject_reason",
    "qc_vector_aggregate",
    "qc_vector_reject_reason",
    "qc_vector_verify",
    "qc_verify",
    "read_key_file",
    "write_key_files",
]
