"""Dealer-generated key material file.

Layout: the canonical encoding of
    ("abcast-keys", version, scheme, n, node, public_keys, secret_key,
     coin_vks, coin_secret, seed)
where mock schemes store their keyed-hash secrets as "public" keys too.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..core.encoding import decode, encode
from .backends import BLSBackend, MockBackend, _mock_key, deal_bls_keys

_MAGIC = "abcast-keys"
_VERSION = 1


@dataclass(frozen=True)
class KeyMaterial:
    scheme: str
    n: int
    node: int
    public_keys: tuple
    secret_key: object
    coin_vks: tuple
    coin_secret: object
    seed: int = 0

    def to_bytes(self) -> bytes:
        sk = self.secret_key if isinstance(self.secret_key, bytes) else int(self.secret_key)
        cs = self.coin_secret if isinstance(self.coin_secret, bytes) else int(self.coin_secret)
        return encode((_MAGIC, _VERSION, self.scheme, self.n, self.node, tuple(self.public_keys), sk, tuple(self.coin_vks), cs, self.seed))

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeyMaterial":
        fields = decode(data)
        if len(fields) != 10 or fields[0] != _MAGIC:
            raise ValueError("not an abcast key file")
        if fields[1] != _VERSION:
            raise ValueError(f"unsupported key file version {fields[1]}")
        _, _, scheme, n, node, pks, sk, vks, cs, seed = fields
        return cls(scheme, n, node, tuple(pks), sk, tuple(vks), cs, seed)

    def backend(self):
        if self.scheme.startswith("bls-real"):
            return BLSBackend(self.public_keys, {self.node: self.secret_key}, self.coin_vks, {self.node: self.coin_secret})
        # mock keys double as verification keys; the coin master is derived
        # from the ceremony seed recorded in the file
        return MockBackend(self.n, self.seed, self.scheme, list(self.public_keys), list(self.coin_vks))


def deal_keys(scheme: str, n: int, seed: int = 0) -> list[KeyMaterial]:
    if scheme.startswith("bls-real"):
        km = deal_bls_keys(n, seed)
        return [
            KeyMaterial(scheme, n, i, tuple(km["public_keys"]), km["secret_keys"][i], tuple(km["coin_vks"]), km["coin_secrets"][i], seed)
            for i in range(n)
        ]
    pks = tuple(_mock_key(seed, "sig", i) for i in range(n))
    vks = tuple(_mock_key(seed, "coin", i) for i in range(n))
    return [KeyMaterial(scheme, n, i, pks, pks[i], vks, vks[i], seed) for i in range(n)]


def write_key_files(directory, scheme: str, n: int, seed: int = 0) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for km in deal_keys(scheme, n, seed):
        path = directory / f"node-{km.node}.key"
        path.write_bytes(km.to_bytes())
        paths.append(path)
    return paths


def read_key_file(path) -> KeyMaterial:
    return KeyMaterial.from_bytes(Path(path).read_bytes())
