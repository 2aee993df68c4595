"""Threshold common coin: an (n-f)-threshold signature on the tag, hashed
and reduced mod n."""

from __future__ import annotations

from dataclasses import dataclass

from ..core.encoding import encode
from ..core.hashing import hash_bytes
from .backends import SignatureBackend


def coin_tag_bytes(tag) -> bytes:
    return encode(("coin",) + tuple(tag))


@dataclass(frozen=True)
class CoinShare:
    signer: int
    tag: tuple
    share: bytes

    def to_wire(self):
        return (self.signer, self.tag, self.share)


def coin_share(backend: SignatureBackend, node: int, tag) -> CoinShare:
    return CoinShare(node, tuple(tag), backend.coin_share(node, coin_tag_bytes(tag)))


def coin_value(sigma: bytes, n: int) -> int:
    return int.from_bytes(hash_bytes(sigma, "coin-value"), "big") % n


def coin_assemble(backend: SignatureBackend, tag, shares, n: int, threshold: int) -> int | None:
    """Elected index in [0, n), or None while fewer than ``threshold`` valid
    shares from distinct signers are present."""
    tb = coin_tag_bytes(tag)
    valid = {}
    for sh in shares:
        if sh.signer in valid or tuple(sh.tag) != tuple(tag):
            continue
        if backend.coin_verify_share(sh.signer, tb, sh.share):
            valid[sh.signer] = sh.share
    if len(valid) < threshold:
        return None
    return coin_value(backend.coin_combine(tb, valid), n)


class CoinCollector:
    """Incremental share collection for one tag. Shares are verified on
    arrival; the first ``threshold`` valid ones fix the value."""

    __slots__ = ("backend", "tag", "tag_bytes", "n", "threshold", "valid", "value", "rejected")

    def __init__(self, backend: SignatureBackend, tag, n: int, threshold: int):
        self.backend = backend
        self.tag = tuple(tag)
        self.tag_bytes = coin_tag_bytes(tag)
        self.n = n
        self.threshold = threshold
        self.valid: dict = {}
        self.value: int | None = None
        self.rejected: set = set()

    def add(self, signer: int, share: bytes) -> int | None:
        if self.value is not None or signer in self.valid or signer in self.rejected:
            return self.value
        if not self.backend.coin_verify_share(signer, self.tag_bytes, share):
            self.rejected.add(signer)
            return None
        self.valid[signer] = share
        if len(self.valid) >= self.threshold:
            self.value = coin_value(self.backend.coin_combine(self.tag_bytes, self.valid), self.n)
        return self.value
