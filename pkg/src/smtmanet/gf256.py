"""Arithmetic over GF(2^8) with the 0x11D reduction polynomial.

Multiplication goes through a full 256x256 lookup table so that whole
byte vectors can be scaled with one numpy fancy-index.
"""

from __future__ import annotations

import numpy as np

PRIM = 0x11D

EXP = np.zeros(512, dtype=np.int64)
LOG = np.zeros(256, dtype=np.int64)

_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= PRIM
for _i in range(255, 512):
    EXP[_i] = EXP[_i - 255]
del _x, _i


def _build_mul_table() -> np.ndarray:
    a = np.arange(256)
    table = EXP[(LOG[a][:, None] + LOG[a][None, :]) % 255].astype(np.uint8)
    table[0, :] = 0
    table[:, 0] = 0
    return table


MUL = _build_mul_table()


def mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(EXP[255 - LOG[a]])


def power(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return int(EXP[(LOG[a] * e) % 255])


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over the field; ``b`` may be a byte matrix of any width."""
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    for i in range(a.shape[0]):
        acc = out[i]
        for k in range(a.shape[1]):
            c = a[i, k]
            if c:
                acc ^= MUL[c][b[k]]
    return out


def invert(matrix: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse of a square matrix over the field."""
    n = matrix.shape[0]
    aug = np.zeros((n, 2 * n), dtype=np.uint8)
    aug[:, :n] = matrix
    aug[:, n:] = np.eye(n, dtype=np.uint8)
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r, col]), None)
        if pivot is None:
            raise np.linalg.LinAlgError("matrix is singular over GF(256)")
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] = MUL[inv(int(aug[col, col]))][aug[col]]
        for r in range(n):
            if r != col and aug[r, col]:
                aug[r] ^= MUL[aug[r, col]][aug[col]]
    return aug[:, n:].copy()
