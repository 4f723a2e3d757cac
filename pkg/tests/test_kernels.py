import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclevy import _kernels
from fraclevy.chaos import MultiIndexSpace

IMPLS = _kernels.implementations()


def _aggregate(ranks, vals, size):
    ok = ranks >= 0
    return np.bincount(ranks[ok], weights=vals[ok], minlength=size)


def test_selected_backend_is_listed():
    assert _kernels.BACKEND in IMPLS
    assert "python" in IMPLS


class TestCausalConvolve:
    @given(st.integers(1, 4), st.integers(0, 90), st.integers(1, 120), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_matches_direct_sum(self, rows, n, m, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((rows, n))
        q = rng.standard_normal(m)
        n_out = n + 5
        ref = np.zeros((rows, n_out))
        for i in range(n_out):
            for j in range(max(0, i - m + 1), min(i + 1, n)):
                ref[:, i] += x[:, j] * q[i - j]
        for mod in IMPLS.values():
            np.testing.assert_allclose(mod.causal_convolve(x, q, n_out), ref, atol=1e-11)

    def test_fft_branch(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 400))
        q = rng.standard_normal(300)
        ref = np.stack([np.convolve(r, q)[:400] for r in x])
        for mod in IMPLS.values():
            np.testing.assert_allclose(mod.causal_convolve(x, q, 400), ref, atol=1e-10)


@pytest.fixture(scope="module")
def space():
    return MultiIndexSpace(5, 4)


class TestWickKernels:
    @given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 30))
    @settings(max_examples=30, deadline=None)
    def test_dense_and_sparse_agree_across_backends(self, space, seed, na, nb):
        rng = np.random.default_rng(seed)
        ia = rng.choice(space.size, na, replace=False)
        ib = rng.choice(space.size, nb, replace=False)
        av, bv = rng.standard_normal(na), rng.standard_normal(nb)
        aw, bw = space.words[ia], space.words[ib]
        dense_a = np.zeros((1, space.size))
        dense_a[0, ia] = av
        results = []
        for mod in IMPLS.values():
            d, dd = mod.wick_dense(dense_a, bv, np.ascontiguousarray(bw), space.succ, space.sentinel)
            r, v, sd = mod.wick_sparse(np.ascontiguousarray(aw), av, np.ascontiguousarray(bw), bv, space.binom, space.offsets, space.sentinel)
            s = _aggregate(r, v, space.size)
            np.testing.assert_allclose(d[0], s, atol=1e-13)
            assert dd == pytest.approx(sd, rel=1e-12, abs=1e-15)
            results.append(s)
        for s in results[1:]:
            np.testing.assert_allclose(s, results[0], atol=1e-13)

    def test_sparse_pair_of_letters(self, space):
        w = np.full((1, 4), space.sentinel)
        w[0, 0] = 2
        for mod in IMPLS.values():
            r, v, dropped = mod.wick_sparse(w, np.array([2.0]), w.copy(), np.array([3.0]), space.binom, space.offsets, space.sentinel)
            target = space.rank(np.array([[2, 2, 5, 5]]))[0]
            assert list(r) == [target] and list(v) == [6.0] and dropped == 0.0
