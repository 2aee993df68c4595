"""Systematic (k, n) erasure code over GF(256) with a Cauchy parity block."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import gf256


class InsufficientShards(ValueError):
    pass


@dataclass(frozen=True)
class CodeWord:
    k: int
    n: int
    shards: tuple  # n byte strings of equal length


@lru_cache(maxsize=None)
def _generator(k: int, n: int) -> tuple:
    """Rows of the n x k generator: identity on top, Cauchy below.

    Parity row i uses x_i = k + i and column j uses y_j = j, so all points are
    distinct and every x_i ^ y_j is non-zero. Each parity row is scaled so
    its first entry is 1; row scaling keeps every k-row minor non-zero and
    makes k = 1 a plain repetition code.
    """
    if not 1 <= k <= n <= 256:
        raise ValueError(f"unsupported code parameters k={k}, n={n}")
    rows = [tuple(int(i == j) for j in range(k)) for i in range(k)]
    for i in range(n - k):
        x = k + i
        row = [gf256.inv(x ^ j) for j in range(k)]
        scale = gf256.inv(row[0])
        rows.append(tuple(gf256.mul(scale, c) for c in row))
    return tuple(rows)


def rs_encode(payload: bytes, k: int, n: int) -> CodeWord:
    if not payload:
        raise ValueError("payload must be non-empty")
    shard_len = -(-len(payload) // k)
    data = np.zeros(k * shard_len, dtype=np.uint8)
    data[: len(payload)] = np.frombuffer(payload, dtype=np.uint8)
    data = data.reshape(k, shard_len)
    gen = _generator(k, n)
    parity = gf256.matmul_rows([list(r) for r in gen[k:]], data)
    shards = tuple(data[i].tobytes() for i in range(k)) + tuple(p.tobytes() for p in parity)
    return CodeWord(k, n, shards)


def rs_decode(fragments, k: int, n: int, payload_len: int) -> bytes:
    """Rebuild the payload from any k distinct (index, shard) pairs.

    Extra fragments beyond the first k distinct indices are ignored.
    """
    chosen: dict[int, bytes] = {}
    for index, shard in fragments:
        if not 0 <= index < n:
            raise ValueError(f"shard index {index} out of range")
        if index not in chosen:
            chosen[index] = shard
        if len(chosen) == k:
            break
    if len(chosen) < k:
        raise InsufficientShards(f"need {k} distinct shards, have {len(chosen)}")
    lengths = {len(s) for s in chosen.values()}
    if len(lengths) != 1:
        raise ValueError("shards differ in length")
    shard_len = lengths.pop()
    if payload_len > k * shard_len:
        raise ValueError("payload length exceeds shard capacity")
    indices = sorted(chosen)
    if indices == list(range(k)):
        data = b"".join(chosen[i] for i in indices)
        return data[:payload_len]
    gen = _generator(k, n)
    sub = [list(gen[i]) for i in indices]
    rows = np.stack([np.frombuffer(chosen[i], dtype=np.uint8) for i in indices])
    data = gf256.matmul_rows(gf256.invert_matrix(sub), rows)
    return data.tobytes()[:payload_len]
