"""Signature backends.

``MockBackend`` replaces group operations with keyed hashes so property
suites can run exhaustively. Its "public key" is the secret key itself,
which is fine for a simulator where verification is an oracle. Aggregation
is modelled as addition modulo a 381-bit prime, mirroring the additive
group law of the pairing scheme.

``BLSBackend`` is a real multi-signature over BLS12-381 with signatures in
G1 (48 bytes compressed) and public keys in G2. Aggregation is point
addition, which is sound here because keys come from a trusted dealer.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from abc import ABC, abstractmethod

from ..core.encoding import encode

SCHEMES = ("mock-deterministic", "bls-multisig", "bls-threshold", "concat-ecdsa-like", "half-agg-schnorr-like")

# BLS12-381 base field modulus; mock aggregates live in the same-size ring.
_P381 = int(
    "1a0111ea397fe69a4b1ba7b6434bacd764774b84f38512bf6730d2a0f6b0f6241eabfffeb153ffffb9feffffffffaaab",
    16,
)
_TAG_CACHE = 1 << 18


class SignatureBackend(ABC):
    """Signing, verification and (optionally) aggregation for n nodes."""

    scheme: str
    n: int
    sig_size: int
    aggregatable: bool

    @abstractmethod
    def sign(self, signer: int, message: bytes) -> bytes: ...

    @abstractmethod
    def verify(self, signer: int, message: bytes, sig: bytes) -> bool: ...

    def aggregate(self, sigs) -> bytes:
        raise TypeError(f"{self.scheme} signatures do not aggregate")

    def verify_aggregate(self, items, agg: bytes) -> bool:
        """items: (message, signer indices) pairs covered by one aggregate."""
        raise TypeError(f"{self.scheme} signatures do not aggregate")

    def combine(self, message: bytes, shares: dict):
        """QC signature field from verified-or-not shares, ordered by signer."""
        ordered = [shares[i] for i in sorted(shares)]
        if self.aggregatable:
            return self.aggregate(ordered)
        return tuple(ordered)

    def verify_combined(self, message: bytes, signers, sig) -> bool:
        signers = list(signers)
        if self.aggregatable:
            return isinstance(sig, bytes) and self.verify_aggregate([(message, signers)], sig)
        if not isinstance(sig, tuple) or len(sig) != len(signers):
            return False
        return all(self.verify(i, message, s) for i, s in zip(signers, sig))

    def qc_sig_size(self, count: int) -> int:
        """Wire bytes of a QC signature field covering ``count`` signers."""
        if self.aggregatable:
            return 5 + self.sig_size
        return 5 + count * (5 + self.sig_size)

    # threshold coin
    @abstractmethod
    def coin_share(self, signer: int, tag_bytes: bytes) -> bytes: ...

    @abstractmethod
    def coin_verify_share(self, signer: int, tag_bytes: bytes, share: bytes) -> bool: ...

    @abstractmethod
    def coin_combine(self, tag_bytes: bytes, shares: dict) -> bytes: ...

    coin_share_size: int = 48


def _mock_key(seed: int, label: str, index: int) -> bytes:
    return hashlib.sha256(encode(("abcast-mock-key", seed, label, index))).digest()


class MockBackend(SignatureBackend):
    """Deterministic keyed-hash stand-in for every supported scheme.

    ``emulate`` picks the size/aggregation profile: the BLS profiles
    aggregate into one 48-byte value, the ECDSA-like profile concatenates
    64-byte signatures, and the half-aggregated Schnorr profile concatenates
    32-byte nonces with one shared 32-byte scalar.
    """

    def __init__(self, n: int, seed: int = 0, emulate: str = "mock-deterministic", secret_keys=None, coin_keys=None, coin_master=None):
        if emulate not in SCHEMES:
            raise ValueError(f"unknown scheme {emulate!r}")
        self.scheme = emulate
        self.n = n
        self.seed = seed
        if secret_keys is None:
            secret_keys = [_mock_key(seed, "sig", i) for i in range(n)]
        if coin_keys is None:
            coin_keys = [_mock_key(seed, "coin", i) for i in range(n)]
        self.keys = list(secret_keys)
        self.coin_keys = list(coin_keys)
        self._tags: dict = {}  # memoized keyed hashes; verification recomputes them a lot
        self.coin_master = coin_master if coin_master is not None else _mock_key(seed, "coin-master", 0)
        if emulate in ("mock-deterministic", "bls-multisig", "bls-threshold"):
            self.sig_size = 48
            self.aggregatable = True
        elif emulate == "concat-ecdsa-like":
            self.sig_size = 64
            self.aggregatable = False
        else:
            self.sig_size = 32
            self.aggregatable = False

    def _tag(self, signer: int, message: bytes) -> int:
        key = (signer, message)
        tag = self._tags.get(key)
        if tag is None:
            if len(self._tags) >= _TAG_CACHE:
                self._tags.clear()
            mac = hmac.digest(self.keys[signer], message, "sha512")
            tag = self._tags[key] = int.from_bytes(mac, "big") % _P381
        return tag

    def sign(self, signer: int, message: bytes) -> bytes:
        if self.sig_size == 48:
            return self._tag(signer, message).to_bytes(48, "big")
        return hmac.digest(self.keys[signer], message, "sha512")[: self.sig_size]

    def verify(self, signer: int, message: bytes, sig: bytes) -> bool:
        if not 0 <= signer < self.n or not isinstance(sig, bytes):
            return False
        return hmac.compare_digest(self.sign(signer, message), sig)

    def aggregate(self, sigs) -> bytes:
        if not self.aggregatable:
            return super().aggregate(sigs)
        total = 0
        for s in sigs:
            total += int.from_bytes(s, "big")
        return (total % _P381).to_bytes(48, "big")

    def verify_aggregate(self, items, agg: bytes) -> bool:
        if not self.aggregatable:
            return super().verify_aggregate(items, agg)
        if not isinstance(agg, bytes) or len(agg) != 48:
            return False
        total = 0
        for message, signers in items:
            for i in signers:
                if not 0 <= i < self.n:
                    return False
                total += self._tag(i, message)
        return total % _P381 == int.from_bytes(agg, "big")

    def qc_sig_size(self, count: int) -> int:
        if self.scheme == "half-agg-schnorr-like":
            # count nonces plus the one aggregated scalar
            return 5 + count * (5 + 32) + (5 + 32)
        return super().qc_sig_size(count)

    def coin_share(self, signer: int, tag_bytes: bytes) -> bytes:
        return hmac.digest(self.coin_keys[signer], tag_bytes, "sha256") + bytes(16)

    def coin_verify_share(self, signer: int, tag_bytes: bytes, share: bytes) -> bool:
        if not 0 <= signer < self.n or not isinstance(share, bytes):
            return False
        return hmac.compare_digest(self.coin_share(signer, tag_bytes), share)

    def coin_combine(self, tag_bytes: bytes, shares: dict) -> bytes:
        return hmac.digest(self.coin_master, tag_bytes, "sha256")


# real pairing-based backend

_DST_SIG = b"ABCAST-BLS-SIG-BLS12381G1_XMD:SHA-256_SSWU_RO_"
_DST_COIN = b"ABCAST-BLS-COIN-BLS12381G1_XMD:SHA-256_SSWU_RO_"


class BLSBackend(SignatureBackend):
    """Multi-signature and threshold coin over BLS12-381 via py_ecc."""

    sig_size = 48
    aggregatable = True
    coin_share_size = 48

    def __init__(self, public_keys, secret_keys=None, coin_vks=None, coin_secrets=None, scheme="bls-multisig"):
        from py_ecc import optimized_bls12_381 as curve
        from py_ecc.bls import g2_primitives as prim
        from py_ecc.bls.hash_to_curve import hash_to_G1

        self._c = curve
        self._p = prim
        self._h2g1 = hash_to_G1
        self.scheme = scheme
        self.n = len(public_keys)
        self.public_keys = [prim.signature_to_G2(pk) for pk in public_keys]
        self.secret_keys = dict(secret_keys or {})
        self.coin_vks = [prim.signature_to_G2(vk) for vk in (coin_vks or [])]
        self.coin_secrets = dict(coin_secrets or {})
        self.threshold = self.n - (self.n - 1) // 3
        self._hash_cache: dict = {}

    @classmethod
    def from_dealer(cls, n: int, seed: int = 0) -> "BLSBackend":
        km = deal_bls_keys(n, seed)
        return cls(km["public_keys"], dict(enumerate(km["secret_keys"])), km["coin_vks"], dict(enumerate(km["coin_secrets"])))

    def _hash(self, message: bytes, dst: bytes):
        key = (message, dst)
        point = self._hash_cache.get(key)
        if point is None:
            point = self._h2g1(message, dst, hashlib.sha256)
            if len(self._hash_cache) > 4096:
                self._hash_cache.clear()
            self._hash_cache[key] = point
        return point

    def _compress(self, point) -> bytes:
        return self._p.G1_to_pubkey(point)

    def _decompress(self, data: bytes):
        try:
            point = self._p.pubkey_to_G1(data)
        except Exception:
            return None
        if not self._p.subgroup_check(point):
            return None
        return point

    def _pairing_product_is_one(self, pairs) -> bool:
        c = self._c
        acc = c.FQ12.one()
        for g2_point, g1_point in pairs:
            acc = acc * c.pairing(g2_point, g1_point, final_exponentiate=False)
        return c.final_exponentiate(acc) == c.FQ12.one()

    def sign(self, signer: int, message: bytes) -> bytes:
        sk = self.secret_keys[signer]
        return self._compress(self._c.multiply(self._hash(message, _DST_SIG), sk))

    def verify(self, signer: int, message: bytes, sig: bytes) -> bool:
        return self.verify_aggregate([(message, [signer])], sig)

    def aggregate(self, sigs) -> bytes:
        c = self._c
        acc = c.Z1
        for s in sigs:
            point = self._decompress(s)
            if point is None:
                # garbage share: keep it in the sum so batch verification fails
                point = self._hash(s, b"ABCAST-GARBAGE")
            acc = c.add(acc, point)
        return self._compress(acc)

    def verify_aggregate(self, items, agg: bytes) -> bool:
        c = self._c
        sig_point = self._decompress(agg) if isinstance(agg, bytes) else None
        if sig_point is None:
            return False
        pairs = [(c.neg(c.G2), sig_point)]
        for message, signers in items:
            apk = c.Z2
            for i in signers:
                if not 0 <= i < self.n:
                    return False
                apk = c.add(apk, self.public_keys[i])
            pairs.append((apk, self._hash(message, _DST_SIG)))
        return self._pairing_product_is_one(pairs)

    def coin_share(self, signer: int, tag_bytes: bytes) -> bytes:
        return self._compress(self._c.multiply(self._hash(tag_bytes, _DST_COIN), self.coin_secrets[signer]))

    def coin_verify_share(self, signer: int, tag_bytes: bytes, share: bytes) -> bool:
        c = self._c
        point = self._decompress(share) if isinstance(share, bytes) else None
        if point is None or not 0 <= signer < len(self.coin_vks):
            return False
        return self._pairing_product_is_one([(c.neg(c.G2), point), (self.coin_vks[signer], self._hash(tag_bytes, _DST_COIN))])

    def coin_combine(self, tag_bytes: bytes, shares: dict) -> bytes:
        """Lagrange interpolation in the exponent over the first threshold shares."""
        c = self._c
        order = c.curve_order
        chosen = sorted(shares)[: self.threshold]
        xs = [i + 1 for i in chosen]
        acc = c.Z1
        for i, x in zip(chosen, xs):
            num, den = 1, 1
            for other in xs:
                if other != x:
                    num = num * other % order
                    den = den * (other - x) % order
            lam = num * pow(den, -1, order) % order
            acc = c.add(acc, c.multiply(self._decompress(shares[i]), lam))
        return self._compress(acc)


def deal_bls_keys(n: int, seed: int = 0) -> dict:
    """Trusted-dealer ceremony: signing keys plus Shamir-shared coin key."""
    from py_ecc import optimized_bls12_381 as curve
    from py_ecc.bls import g2_primitives as prim

    order = curve.curve_order
    rng = random.Random(encode(("abcast-bls-dealer", n, seed)))
    secret_keys = [rng.randrange(1, order) for _ in range(n)]
    public_keys = [prim.G2_to_signature(curve.multiply(curve.G2, sk)) for sk in secret_keys]
    threshold = n - (n - 1) // 3
    poly = [rng.randrange(1, order) for _ in range(threshold)]

    def evaluate(x: int) -> int:
        acc = 0
        for coeff in reversed(poly):
            acc = (acc * x + coeff) % order
        return acc

    coin_secrets = [evaluate(i + 1) for i in range(n)]
    coin_vks = [prim.G2_to_signature(curve.multiply(curve.G2, s)) for s in coin_secrets]
    return {
        "public_keys": public_keys,
        "secret_keys": secret_keys,
        "coin_vks": coin_vks,
        "coin_secrets": coin_secrets,
    }


def make_backend(scheme: str, n: int, seed: int = 0) -> SignatureBackend:
    """Backend for a simulation. Pairing schemes use the real curve only when
    asked for explicitly with a ``bls-real`` prefix; otherwise the mock
    emulates their sizes."""
    if scheme.startswith("bls-real"):
        return BLSBackend.from_dealer(n, seed)
    return MockBackend(n, seed, emulate=scheme)
