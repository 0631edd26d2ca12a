"""Row reduction over the prime field Z_b."""

from __future__ import annotations

import numpy as np


def rank_mod_p(rows: np.ndarray, p: int) -> int:
    """Rank over Z_p of an integer matrix (any shape)."""
    a = np.array(rows, dtype=np.int64) % p
    if a.ndim != 2 or a.size == 0:
        return 0
    n_rows, n_cols = a.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        nz = np.nonzero(a[rank:, col])[0]
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        a[rank] = (a[rank] * pow(int(a[rank, col]), -1, p)) % p
        below = a[rank + 1 :, col].copy()
        if below.any():
            a[rank + 1 :] = (a[rank + 1 :] - np.outer(below, a[rank])) % p
        rank += 1
    return rank


def is_independent(rows: np.ndarray, p: int) -> bool:
    rows = np.asarray(rows)
    return rows.shape[0] == 0 or rank_mod_p(rows, p) == rows.shape[0]


def matpow_mod(a: np.ndarray, e: int, p: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64) % p
    out = np.eye(a.shape[0], dtype=np.int64)
    while e:
        if e & 1:
            out = (out @ a) % p
        a = (a @ a) % p
        e >>= 1
    return out
