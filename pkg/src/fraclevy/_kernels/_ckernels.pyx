# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: causal convolution and Wick (Cauchy) products."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def causal_convolve(const double[:, ::1] x, const double[::1] q, Py_ssize_t n_out):
    """out[p, e] = sum_c x[p, c] * q[e - c] over 0 <= e - c < len(q)."""
    cdef Py_ssize_t n_rows = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t m = q.shape[0]
    cdef Py_ssize_t p, e, c, c_lo, c_hi
    cdef double acc
    out = np.zeros((n_rows, n_out), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for p in range(n_rows):
            for e in range(n_out):
                c_lo = e - m + 1
                if c_lo < 0:
                    c_lo = 0
                c_hi = e
                if c_hi > n - 1:
                    c_hi = n - 1
                acc = 0.0
                for c in range(c_lo, c_hi + 1):
                    acc = acc + x[p, c] * q[e - c]
                o[p, e] = acc
    return out


def wick_dense(
    const double[:, ::1] a,
    const double[::1] b_val,
    const cnp.int64_t[:, ::1] b_words,
    const cnp.int32_t[:, ::1] succ,
    Py_ssize_t sentinel,
):
    """Cauchy product of dense rows of ``a`` with a sparse element ``b``.

    ``succ[r, k]`` is the rank of multi-index ``r + e_k`` or -1 beyond the
    order cap. Returns ``(out, dropped)`` where ``dropped`` is the summed
    magnitude of truncated products.
    """
    cdef Py_ssize_t n_rows = a.shape[0]
    cdef Py_ssize_t size = a.shape[1]
    cdef Py_ssize_t nb = b_val.shape[0]
    cdef Py_ssize_t width = b_words.shape[1]
    cdef Py_ssize_t r, i, j, s, idx, letter
    cdef double av, bv, dropped = 0.0
    out = np.zeros((n_rows, size), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for j in range(nb):
            bv = b_val[j]
            if bv == 0.0:
                continue
            for i in range(size):
                idx = i
                for s in range(width):
                    letter = b_words[j, s]
                    if letter == sentinel:
                        break
                    idx = succ[idx, letter]
                    if idx < 0:
                        break
                for r in range(n_rows):
                    av = a[r, i]
                    if av == 0.0:
                        continue
                    if idx < 0:
                        dropped = dropped + fabs(av * bv)
                    else:
                        o[r, idx] = o[r, idx] + av * bv
    return out, dropped


def wick_sparse(
    const cnp.int64_t[:, ::1] a_words,
    const double[::1] a_val,
    const cnp.int64_t[:, ::1] b_words,
    const double[::1] b_val,
    const cnp.int64_t[:, ::1] binom,
    const cnp.int64_t[::1] offsets,
    Py_ssize_t sentinel,
):
    """All pairwise merged multi-index ranks (``-1`` when over the cap)."""
    cdef Py_ssize_t na = a_val.shape[0]
    cdef Py_ssize_t nb = b_val.shape[0]
    cdef Py_ssize_t cap = a_words.shape[1]
    cdef Py_ssize_t i, j, pa, pb, n, pos, letter
    cdef cnp.int64_t rank
    cdef double dropped = 0.0
    cdef bint over
    ranks = np.empty(na * nb, dtype=np.int64)
    vals = np.empty(na * nb, dtype=np.float64)
    cdef cnp.int64_t[::1] rk = ranks
    cdef double[::1] vv = vals
    with nogil:
        for i in range(na):
            for j in range(nb):
                pa = 0
                pb = 0
                n = 0
                rank = 0
                over = False
                while True:
                    if pa < cap and a_words[i, pa] != sentinel:
                        if pb < cap and b_words[j, pb] != sentinel and b_words[j, pb] < a_words[i, pa]:
                            letter = b_words[j, pb]
                            pb = pb + 1
                        else:
                            letter = a_words[i, pa]
                            pa = pa + 1
                    elif pb < cap and b_words[j, pb] != sentinel:
                        letter = b_words[j, pb]
                        pb = pb + 1
                    else:
                        break
                    n = n + 1
                    if n > cap:
                        over = True
                        break
                    rank = rank + binom[letter + n - 1, n]
                pos = i * nb + j
                vv[pos] = a_val[i] * b_val[j]
                if over:
                    rk[pos] = -1
                    dropped = dropped + fabs(vv[pos])
                else:
                    rk[pos] = rank + offsets[n]
    return ranks, vals, dropped
