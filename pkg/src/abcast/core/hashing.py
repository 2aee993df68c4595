from __future__ import annotations

import hashlib

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)


def hash_bytes(data: bytes, label: str = "") -> bytes:
    """SHA-256 over a length-prefixed context label followed by the data."""
    h = hashlib.sha256()
    tag = label.encode()
    h.update(len(tag).to_bytes(2, "little"))
    h.update(tag)
    h.update(data)
    return h.digest()


def check_digest(value) -> bytes:
    if not isinstance(value, bytes) or len(value) != DIGEST_SIZE:
        raise ValueError("digest must be exactly 32 bytes")
    return value
