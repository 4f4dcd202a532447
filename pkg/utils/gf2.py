"""
GF(2) linear algebra on numpy uint8 arrays.

Matrices hold 0/1 entries; all arithmetic is reduced mod 2.
"""

import numpy as np


def as_gf2(matrix):
    return np.asarray(matrix, dtype=np.uint8) & 1


def matmul(left, right):
    """Matrix product over GF(2)."""
    return (as_gf2(left).astype(np.int64) @ as_gf2(right).astype(np.int64) % 2).astype(np.uint8)


def rank(matrix):
    """Rank over GF(2) by Gaussian elimination."""
    work = as_gf2(matrix).copy()
    if work.size == 0:
        return 0
    rows, cols = work.shape
    pivot_row = 0
    for col in range(cols):
        if pivot_row >= rows:
            break
        candidates = np.nonzero(work[pivot_row:, col])[0]
        if candidates.size == 0:
            continue
        swap = pivot_row + candidates[0]
        if swap != pivot_row:
            work[[pivot_row, swap]] = work[[swap, pivot_row]]
        below = np.nonzero(work[:, col])[0]
        for r in below:
            if r != pivot_row:
                work[r] ^= work[pivot_row]
        pivot_row += 1
    return pivot_row


def pack_rows(matrix):
    """Row-major bit packing to hex."""
    flat = as_gf2(matrix).reshape(-1)
    return np.packbits(flat).tobytes().hex()


def unpack_rows(hex_text, rows, cols):
    """Inverse of :func:`pack_rows`."""
    raw = np.frombuffer(bytes.fromhex(hex_text), dtype=np.uint8)
    flat = np.unpackbits(raw)[:rows * cols]
    if flat.size != rows * cols:
        raise ValueError(f"packed matrix too short for {rows}x{cols}")
    return flat.reshape(rows, cols).astype(np.uint8)
