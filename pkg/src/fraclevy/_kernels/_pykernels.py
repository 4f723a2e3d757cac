"""Pure-numpy versions of the compiled kernels (same signatures, same results)."""

import numpy as np
from scipy import signal


def causal_convolve(x, q, n_out):
    x = np.ascontiguousarray(x, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    out = np.zeros((x.shape[0], n_out))
    if x.shape[1] == 0 or q.size == 0:
        return out
    full = signal.oaconvolve(x, q[None, :], axes=1) if x.shape[1] * q.size > 4096 else (
        np.stack([np.convolve(row, q) for row in x])
    )
    k = min(n_out, full.shape[1])
    out[:, :k] = full[:, :k]
    return out


def wick_dense(a, b_val, b_words, succ, sentinel):
    a = np.asarray(a, dtype=np.float64)
    out = np.zeros_like(a)
    dropped = 0.0
    size = a.shape[1]
    base = np.arange(size)
    for bv, word in zip(b_val, b_words):
        if bv == 0.0:
            continue
        idx = base
        for letter in word:
            if letter == sentinel:
                break
            idx = np.where(idx >= 0, succ[np.maximum(idx, 0), letter], -1)
        ok = idx >= 0
        contrib = a * bv
        if not ok.all():
            dropped += float(np.abs(contrib[:, ~ok]).sum())
        np.add.at(out, (slice(None), idx[ok]), contrib[:, ok])
    return out, dropped


def wick_sparse(a_words, a_val, b_words, b_val, binom, offsets, sentinel):
    a_words = np.asarray(a_words, dtype=np.int64)
    b_words = np.asarray(b_words, dtype=np.int64)
    na, cap = a_words.shape
    nb = b_words.shape[0]
    merged = np.concatenate(
        [np.repeat(a_words, nb, axis=0), np.tile(b_words, (na, 1))], axis=1
    )
    merged.sort(axis=1)
    vals = (np.asarray(a_val)[:, None] * np.asarray(b_val)[None, :]).ravel()
    over = merged[:, cap] != sentinel if cap < merged.shape[1] else np.zeros(len(vals), bool)
    merged = merged[:, :cap]
    present = merged != sentinel
    n = present.sum(axis=1)
    pos = np.arange(1, cap + 1)[None, :]
    letters = np.where(present, merged, 0)
    terms = np.where(present, binom[letters + pos - 1, np.broadcast_to(pos, merged.shape)], 0)
    ranks = terms.sum(axis=1) + offsets[n]
    ranks[over] = -1
    dropped = float(np.abs(vals[over]).sum())
    return ranks.astype(np.int64), vals, dropped
