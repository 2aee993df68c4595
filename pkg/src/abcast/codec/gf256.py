"""GF(2^8) arithmetic with the AES polynomial x^8 + x^4 + x^3 + x + 1."""

from __future__ import annotations

import numpy as np

_POLY = 0x11B


def _build_tables():
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        # multiply by the generator 3
        x ^= (x << 1) ^ (_POLY if x & 0x80 else 0)
        x &= 0xFF
    exp[255:510] = exp[:255]
    mul = np.zeros((256, 256), dtype=np.uint8)
    for a in range(1, 256):
        mul[a, 1:] = exp[log[a] + log[1:256]]
    return exp, log, mul


EXP, LOG, MUL = _build_tables()


def mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(EXP[255 - LOG[a]])


def invert_matrix(m: list[list[int]]) -> list[list[int]]:
    """Gauss-Jordan inversion over GF(256)."""
    size = len(m)
    aug = [list(row) + [int(i == j) for j in range(size)] for i, row in enumerate(m)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if aug[r][col]), None)
        if pivot is None:
            raise ValueError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        scale = inv(aug[col][col])
        aug[col] = [mul(v, scale) for v in aug[col]]
        for r in range(size):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                row = aug[col]
                aug[r] = [v ^ mul(factor, p) for v, p in zip(aug[r], row)]
    return [row[size:] for row in aug]


def matmul_rows(coeffs: list[list[int]], rows: np.ndarray) -> np.ndarray:
    """coeffs (a x b) times rows (b x L) over GF(256)."""
    out = np.zeros((len(coeffs), rows.shape[1]), dtype=np.uint8)
    for i, line in enumerate(coeffs):
        acc = out[i]
        for j, c in enumerate(line):
            if c:
                acc ^= MUL[c][rows[j]]
    return out
