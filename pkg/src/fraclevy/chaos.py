"""Truncated chaos expansions over a finite basis of ``U = R x R_0``.

Basis
-----
Time cells ``i`` of a :class:`~fraclevy.grid.TimeGrid` times mark atoms ``j``
of a :class:`~fraclevy.levy_models.DiscretizedMeasure`. In ``"atoms"`` mode
the basis index is ``k = i * n_marks + j`` with pi-weight ``w_k = h * w_j``
and ``e_k = 1_{cell i} x 1_{y_j} / sqrt(w_k)``. In ``"separable"`` mode only
directions ``e_i = y 1_{cell i} / sqrt(h m2)`` are kept; every kernel of the
form ``y k(u)`` lives there and the dimension drops to ``n_cells``.

Normalization
-------------
``K_alpha`` denotes the monomial with ``S(K_alpha)(eta) = prod_k eta_k^alpha_k``
where ``eta_k = <e_k, eta>_pi``. Then the Wick product is the plain Cauchy
product of coefficient arrays and ``E[K_alpha^2] = alpha!``.

Storage
-------
A multi-index of order ``n`` is stored as its sorted "word" of letters
``k_1 <= ... <= k_n``; words are ranked in graded colex order
(``rank = C(d+n-1, n-1) + sum_i C(k_i + i - 1, i)``), so a chaos element is a
pair of sorted rank and coefficient arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
from scipy import special

from . import _kernels
from .grid import TimeGrid, pow_plus
from .levy_models import DiscretizedMeasure

DENSE_LIMIT = 4_000_000  # size * d entries of the successor table


class MultiIndexSpace:
    """Ranks, words and successor tables for multi-indices of order <= ``order`` over ``d`` letters."""

    def __init__(self, d: int, order: int):
        if d < 1 or order < 0:
            raise ValueError("need d >= 1 and order >= 0")
        total = math.comb(d + order, order)
        if total >= 2**62:
            raise OverflowError(f"{total} multi-indices do not fit int64 ranks")
        self.d = d
        self.order = order
        self.size = total
        self.sentinel = d
        rows = d + order + 1
        binom = np.zeros((rows, order + 2), dtype=np.int64)
        for x in range(rows):
            for i in range(order + 2):
                binom[x, i] = math.comb(x, i)
        self.binom = binom
        self.offsets = np.array([math.comb(d + n - 1, n - 1) if n > 0 else 0 for n in range(order + 2)], dtype=np.int64)

    @property
    def dense(self) -> bool:
        return self.size * self.d <= DENSE_LIMIT

    def rank(self, words: np.ndarray) -> np.ndarray:
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        if words.shape[1] == 0:
            return np.zeros(words.shape[0], dtype=np.int64)
        present = words != self.sentinel
        n = present.sum(axis=1)
        pos = np.arange(1, words.shape[1] + 1)[None, :]
        letters = np.where(present, words, 0)
        terms = np.where(present, self.binom[letters + pos - 1, np.broadcast_to(pos, words.shape)], 0)
        return terms.sum(axis=1) + self.offsets[n]

    def unrank(self, ranks: np.ndarray) -> np.ndarray:
        """Words ``(len(ranks), order)``, padded with the sentinel."""
        ranks = np.asarray(ranks, dtype=np.int64)
        out = np.full((ranks.size, self.order), self.sentinel, dtype=np.int64)
        if self.order == 0:
            return out
        n = np.searchsorted(self.offsets[1:], ranks, side="right")
        r = ranks - self.offsets[n]
        for i in range(self.order, 0, -1):
            active = n >= i
            if not np.any(active):
                continue
            col = self.binom[:, i]
            c = np.searchsorted(col, r[active], side="right") - 1
            out[active, i - 1] = c - i + 1
            r[active] -= col[c]
        return out

    @cached_property
    def words(self) -> np.ndarray:
        return self.unrank(np.arange(self.size, dtype=np.int64))

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.searchsorted(self.offsets[1:], np.arange(self.size), side="right")

    @cached_property
    def succ(self) -> np.ndarray:
        """``succ[r, k]`` = rank of ``r + e_k``, ``-1`` beyond the order cap."""
        if not self.dense:
            raise MemoryError(f"successor table of {self.size} x {self.d} entries exceeds DENSE_LIMIT")
        words = self.words
        deg = self.degrees
        out = np.full((self.size, self.d), -1, dtype=np.int32)
        room = np.nonzero(deg < self.order)[0]
        if room.size == 0:
            return out
        base = words[room]
        for k in range(self.d):
            ext = np.concatenate([base, np.full((room.size, 1), k, dtype=np.int64)], axis=1)
            ext.sort(axis=1)
            out[room, k] = self.rank(ext[:, : self.order])
        return out

    def factorials(self, words: np.ndarray) -> np.ndarray:
        """``alpha!`` for each word."""
        words = np.atleast_2d(words)
        out = np.ones(words.shape[0])
        run = np.ones(words.shape[0])
        for c in range(1, words.shape[1]):
            same = (words[:, c] == words[:, c - 1]) & (words[:, c] != self.sentinel)
            run = np.where(same, run + 1, 1.0)
            out *= np.where(words[:, c] != self.sentinel, run, 1.0)
        return out

    def monomials(self, eta: np.ndarray, words: Optional[np.ndarray] = None) -> np.ndarray:
        """``prod_k eta_k^alpha_k`` for each word (all words if ``None``)."""
        ext = np.append(np.asarray(eta, dtype=np.float64), 1.0)
        w = self.words if words is None else words
        if w.shape[1] == 0:
            return np.ones(w.shape[0])
        return ext[w].prod(axis=1)


@lru_cache(maxsize=32)
def multi_index_space(d: int, order: int) -> MultiIndexSpace:
    return MultiIndexSpace(d, order)


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Finite orthonormal system of ``L2(U, pi)`` plus the chaos order cap."""

    grid: TimeGrid
    marks: DiscretizedMeasure
    order: int
    mark_mode: str = "atoms"

    def __post_init__(self):
        if self.mark_mode not in ("atoms", "separable"):
            raise ValueError(f"mark_mode must be 'atoms' or 'separable', got {self.mark_mode!r}")
        if int(self.order) != self.order or self.order < 0:
            raise ValueError("order must be a non-negative integer")

    @property
    def n_marks(self) -> int:
        return self.marks.n_atoms

    @property
    def m2(self) -> float:
        return self.marks.m2

    @property
    def d(self) -> int:
        n = self.grid.n_cells
        return n * self.n_marks if self.mark_mode == "atoms" else n

    @cached_property
    def weights(self) -> np.ndarray:
        h = self.grid.h
        if self.mark_mode == "atoms":
            return np.repeat(np.full(self.grid.n_cells, h), self.n_marks) * np.tile(self.marks.masses, self.grid.n_cells)
        return np.full(self.grid.n_cells, h * self.m2)

    @property
    def space(self) -> MultiIndexSpace:
        return multi_index_space(self.d, int(self.order))

    def same_as(self, other: "BasisSpec") -> bool:
        return self is other or (
            self.grid.same_as(other.grid)
            and self.order == other.order
            and self.mark_mode == other.mark_mode
            and np.array_equal(self.marks.sizes, other.marks.sizes)
            and np.array_equal(self.marks.masses, other.marks.masses)
        )

    def with_order(self, order: int) -> "BasisSpec":
        return BasisSpec(self.grid, self.marks, order, self.mark_mode)

    def project(self, values) -> np.ndarray:
        """``<f, e_k>_pi`` for ``f`` given as ``(n_cells, n_marks)`` cell values."""
        f = np.asarray(values, dtype=np.float64)
        if f.shape != (self.grid.n_cells, self.n_marks):
            raise ValueError(f"expected shape {(self.grid.n_cells, self.n_marks)}, got {f.shape}")
        if self.mark_mode == "atoms":
            return np.sqrt(self.weights) * f.ravel()
        h = self.grid.h
        return (f * (self.marks.masses * self.marks.sizes)[None, :]).sum(axis=1) * h / np.sqrt(h * self.m2)

    def project_separable(self, time_values) -> np.ndarray:
        """``<y k(u), e_k>_pi`` for a time kernel ``k`` given by cell averages."""
        k = np.asarray(time_values, dtype=np.float64)
        if k.shape != (self.grid.n_cells,):
            raise ValueError(f"expected {self.grid.n_cells} cell values, got shape {k.shape}")
        if self.mark_mode == "atoms":
            return (k[:, None] * (np.sqrt(self.grid.h * self.marks.masses) * self.marks.sizes)[None, :]).ravel()
        return np.sqrt(self.grid.h * self.m2) * k

    def time_kernel(self, coeffs) -> np.ndarray:
        """Inverse of :meth:`project_separable`; raises if the kernel is not ``y k(u)``."""
        c = np.asarray(coeffs, dtype=np.float64)
        if self.mark_mode == "separable":
            return c / np.sqrt(self.grid.h * self.m2)
        scale = np.sqrt(self.grid.h * self.marks.masses) * self.marks.sizes
        k = c.reshape(self.grid.n_cells, self.n_marks) / scale[None, :]
        ref = k.mean(axis=1)
        if not np.allclose(k, ref[:, None], rtol=1e-9, atol=1e-12 * max(1.0, np.abs(ref).max(initial=0.0))):
            raise ValueError("first-chaos kernel is not of the separable form y k(u)")
        return ref


@dataclass(frozen=True, eq=False)
class TestFunction:
    """S-transform argument ``eta`` through its coefficients ``eta_k = <e_k, eta>_pi``."""

    basis: BasisSpec
    coeffs: np.ndarray

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (self.basis.d,):
            raise ValueError(f"expected {self.basis.d} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("test-function coefficients must be finite")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_values(cls, basis: BasisSpec, values) -> "TestFunction":
        return cls(basis, basis.project(values))

    @classmethod
    def random(cls, basis: BasisSpec, rng: np.random.Generator, gauge: float = 0.5) -> "TestFunction":
        """Random direction scaled to ``gauge`` (must be < 1)."""
        v = rng.standard_normal(basis.d)
        return cls(basis, gauge * v / np.linalg.norm(v))

    @property
    def gauge(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def check_admissible(self):
        g = self.gauge
        if not g < 1.0:
            raise ValueError(f"test function not admissible: gauge {g:.4g} >= 1")


def probe_set(basis: BasisSpec, n: int = 10, seed: int = 2024, gauge: float = 0.5) -> list:
    """``n`` fixed pseudo-random admissible test functions."""
    from .levy_models import STREAM_PROBES, make_rng

    rng = make_rng(seed, STREAM_PROBES)
    return [TestFunction.random(basis, rng, gauge) for _ in range(n)]


@dataclass(frozen=True, eq=False)
class ChaosElement:
    """Sparse truncated chaos expansion ``sum_alpha c_alpha K_alpha``.

    ``overflow`` is sticky: once a product dropped mass above the order cap,
    every element computed from it carries the flag. ``dropped`` accumulates
    the absolute size of the discarded products.
    """

    basis: BasisSpec
    ranks: np.ndarray = field(repr=False)
    coefs: np.ndarray = field(repr=False)
    overflow: bool = False
    dropped: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.ranks, dtype=np.int64).ravel()
        c = np.asarray(self.coefs, dtype=np.float64).ravel()
        if r.shape != c.shape:
            raise ValueError("ranks and coefficients differ in length")
        if r.size and (r.min() < 0 or r.max() >= self.basis.space.size):
            raise ValueError("multi-index outside the truncated index set")
        if r.size > 1 and not np.all(np.diff(r) > 0):
            order = np.argsort(r, kind="stable")
            r, inv = np.unique(r[order], return_inverse=True)
            c = np.bincount(inv, weights=c[order], minlength=r.size)
        r.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "ranks", r)
        object.__setattr__(self, "coefs", c)

    # construction -----------------------------------------------------------

    @classmethod
    def zero(cls, basis: BasisSpec) -> "ChaosElement":
        return cls(basis, np.empty(0, np.int64), np.empty(0))

    @classmethod
    def constant(cls, basis: BasisSpec, c: float) -> "ChaosElement":
        return cls(basis, np.zeros(1, np.int64), np.array([float(c)]))

    @classmethod
    def first_chaos(cls, basis: BasisSpec, coeffs) -> "ChaosElement":
        """``<C_1, f>`` from the coefficients ``<f, e_k>_pi``."""
        c = np.asarray(coeffs, dtype=np.float64)
        if c.shape != (basis.d,):
            raise ValueError(f"expected {basis.d} coefficients, got shape {c.shape}")
        if basis.order < 1:
            return cls(basis, np.empty(0, np.int64), np.empty(0), overflow=bool(np.any(c)), dropped=float(np.abs(c).sum()))
        return cls(basis, 1 + np.arange(basis.d, dtype=np.int64), c)

    @classmethod
    def from_words(cls, basis: BasisSpec, words, coefs) -> "ChaosElement":
        if isinstance(words, (list, tuple)) and any(len(x) != len(words[0]) for x in words):
            width = max(basis.order, max(len(x) for x in words))
            words = [list(x) + [basis.d] * (width - len(x)) for x in words]
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        if w.shape[1] < basis.order:
            pad = np.full((w.shape[0], basis.order - w.shape[1]), basis.d, dtype=np.int64)
            w = np.concatenate([w, pad], axis=1)
        w = np.sort(w, axis=1)
        if w.shape[1] > basis.order:
            if np.any(w[:, basis.order :] != basis.d):
                raise ValueError("multi-index order above the cap")
            w = w[:, : basis.order]
        return cls(basis, basis.space.rank(w), coefs)

    @classmethod
    def from_dense(cls, basis: BasisSpec, data, overflow=False, dropped=0.0) -> "ChaosElement":
        data = np.asarray(data, dtype=np.float64)
        nz = np.nonzero(data)[0]
        return cls(basis, nz.astype(np.int64), data[nz], overflow, dropped)

    # views ------------------------------------------------------------------

    @cached_property
    def words(self) -> np.ndarray:
        return self.basis.space.unrank(self.ranks)

    @property
    def nnz(self) -> int:
        return int(self.ranks.size)

    @property
    def degrees(self) -> np.ndarray:
        return np.searchsorted(self.basis.space.offsets[1:], self.ranks, side="right")

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max(initial=0))

    def dense(self) -> np.ndarray:
        out = np.zeros(self.basis.space.size)
        out[self.ranks] = self.coefs
        return out

    def coefficient(self, word=()) -> float:
        r = self.basis.space.rank(np.array([list(word) + [self.basis.d] * (self.basis.order - len(word))]))[0]
        i = np.searchsorted(self.ranks, r)
        return float(self.coefs[i]) if i < self.ranks.size and self.ranks[i] == r else 0.0

    @property
    def mean(self) -> float:
        return self.coefficient(())

    def chaos_component(self, n: int) -> "ChaosElement":
        keep = self.degrees == n
        return ChaosElement(self.basis, self.ranks[keep], self.coefs[keep], self.overflow, self.dropped)

    def first_chaos_coeffs(self) -> np.ndarray:
        out = np.zeros(self.basis.d)
        keep = self.degrees == 1
        out[self.ranks[keep] - 1] = self.coefs[keep]
        return out

    @property
    def variance(self) -> float:
        """``E[F^2] - E[F]^2`` for a square-integrable element."""
        f = self.basis.space.factorials(self.words)
        nonconst = self.ranks != 0
        return float(np.sum(self.coefs[nonconst] ** 2 * f[nonconst]))

    # arithmetic -------------------------------------------------------------

    def _check(self, other):
        if not isinstance(other, ChaosElement):
            raise TypeError(f"expected ChaosElement, got {type(other).__name__}")
        if not self.basis.same_as(other.basis):
            raise ValueError("chaos elements live on different bases")

    def __add__(self, other):
        if np.isscalar(other):
            other = ChaosElement.constant(self.basis, other)
        self._check(other)
        return ChaosElement(
            self.basis,
            np.concatenate([self.ranks, other.ranks]),
            np.concatenate([self.coefs, other.coefs]),
            self.overflow or other.overflow,
            self.dropped + other.dropped,
        )

    __radd__ = __add__

    def __neg__(self):
        return ChaosElement(self.basis, self.ranks, -self.coefs, self.overflow, self.dropped)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if isinstance(c, ChaosElement):
            raise TypeError("use wick() for products of chaos elements")
        return ChaosElement(self.basis, self.ranks, self.coefs * float(c), self.overflow, self.dropped)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def wick(self, other: "ChaosElement") -> "ChaosElement":
        return wick_product(self, other)

    def s_transform(self, eta: TestFunction) -> float:
        return s_transform(self, eta)

    def allclose(self, other: "ChaosElement", atol: float = 1e-12) -> bool:
        diff = self - other
        return bool(np.all(np.abs(diff.coefs) <= atol))

    def __repr__(self):
        flag = ", overflow" if self.overflow else ""
        return f"ChaosElement(d={self.basis.d}, order<={self.basis.order}, nnz={self.nnz}{flag})"

    # serialization ------------------------------------------------------------

    def to_text(self) -> str:
        """Sparse text dump: one ``index:count ... -> coefficient`` line per term."""
        lines = [
            "# fraclevy chaos element",
            f"# d {self.basis.d} order {self.basis.order} mode {self.basis.mark_mode}",
            f"# overflow {int(self.overflow)} dropped {self.dropped!r}",
        ]
        for word, c in zip(self.words, self.coefs):
            letters, counts = np.unique(word[word != self.basis.d], return_counts=True)
            key = " ".join(f"{k}:{n}" for k, n in zip(letters, counts)) or "()"
            lines.append(f"{key} -> {float(c)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, basis: BasisSpec, text: str) -> "ChaosElement":
        words, coefs = [], []
        overflow, dropped = False, 0.0
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts[:1] == ["d"] and (int(parts[1]) != basis.d or int(parts[3]) != basis.order):
                    raise ValueError("text dump was written for a different basis")
                if parts[:1] == ["overflow"]:
                    overflow, dropped = bool(int(parts[1])), float(parts[3])
                continue
            key, val = line.split("->")
            word = []
            if key.strip() != "()":
                for item in key.split():
                    k, n = item.split(":")
                    word += [int(k)] * int(n)
            if len(word) > basis.order:
                raise ValueError(f"multi-index of order {len(word)} above the cap {basis.order}")
            words.append(word + [basis.d] * (basis.order - len(word)))
            coefs.append(float(val))
        if not words:
            return cls(basis, np.empty(0, np.int64), np.empty(0), overflow, dropped)
        w = np.sort(np.array(words, dtype=np.int64).reshape(len(words), basis.order), axis=1)
        return cls(basis, basis.space.rank(w), coefs, overflow, dropped)


# operations -------------------------------------------------------------------


def random_element(
    basis: BasisSpec, rng: np.random.Generator, max_degree: int = 2, nnz: int = 12, scale: float = 1.0
) -> ChaosElement:
    """``nnz`` normal coefficients on random indices with ``|alpha| <= max_degree``."""
    space = basis.space
    top = min(max_degree, space.order)
    n_idx = int(space.offsets[top + 1]) if top + 1 < space.offsets.size else space.size
    k = min(nnz, n_idx)
    ranks = rng.choice(n_idx, size=k, replace=False).astype(np.int64)
    return ChaosElement(basis, ranks, scale * rng.standard_normal(k))


def s_transform(F: ChaosElement, eta: TestFunction) -> float:
    """``S(F)(eta) = sum_alpha c_alpha prod_k eta_k^alpha_k``."""
    if not F.basis.same_as(eta.basis):
        raise ValueError("element and test function live on different bases")
    eta.check_admissible()
    if F.nnz == 0:
        return 0.0
    return float(F.basis.space.monomials(eta.coeffs, F.words) @ F.coefs)


def wick_product(F: ChaosElement, G: ChaosElement, backend=None) -> ChaosElement:
    """Cauchy product of coefficients, truncated at the basis order.

    ``backend`` selects a kernel module from :func:`fraclevy._kernels.implementations`
    (default: the one picked at import).
    """
    F._check(G)
    kern = _kernels if backend is None else _kernels.implementations()[backend]
    basis = F.basis
    space = basis.space
    flag = F.overflow or G.overflow
    dropped0 = F.dropped + G.dropped
    if F.nnz == 0 or G.nnz == 0:
        return ChaosElement(basis, np.empty(0, np.int64), np.empty(0), flag, dropped0)
    if F.nnz < G.nnz:
        F, G = G, F
    if space.order == 0:
        return ChaosElement(basis, np.zeros(1, np.int64), [F.mean * G.mean], flag, dropped0)
    if space.dense and F.nnz * G.nnz > space.size:
        data, dropped = kern.wick_dense(
            F.dense()[None, :], np.ascontiguousarray(G.coefs), np.ascontiguousarray(G.words), space.succ, space.sentinel
        )
        return ChaosElement.from_dense(basis, data[0], flag or dropped > 0, dropped0 + dropped)
    ranks, vals, dropped = kern.wick_sparse(
        np.ascontiguousarray(F.words),
        np.ascontiguousarray(F.coefs),
        np.ascontiguousarray(G.words),
        np.ascontiguousarray(G.coefs),
        space.binom,
        space.offsets,
        space.sentinel,
    )
    ok = ranks >= 0
    return ChaosElement(basis, ranks[ok], vals[ok], flag or dropped > 0, dropped0 + dropped)


def wick_power(F: ChaosElement, n: int) -> ChaosElement:
    out = ChaosElement.constant(F.basis, 1.0)
    for _ in range(n):
        out = wick_product(out, F)
    return out


def wick_exp(F: ChaosElement) -> ChaosElement:
    """``sum_n F^{<>n} / n!`` truncated at the order cap.

    The constant part factors out exactly; the remaining series terminates
    at the cap because each Wick power raises the lowest order by one.
    """
    c0 = F.mean
    if abs(c0) > 20:
        raise ValueError(f"constant part {c0:.3g} too large for wick_exp (|c0| <= 20)")
    G = F - ChaosElement.constant(F.basis, c0) if c0 != 0.0 else F
    G = ChaosElement(G.basis, G.ranks[G.ranks != 0], G.coefs[G.ranks != 0], G.overflow, G.dropped)
    term = ChaosElement.constant(F.basis, 1.0)
    total = term
    for n in range(1, F.basis.order + 1):
        term = wick_product(term, G) / n
        total = total + term
    if G.nnz:
        # the exact series never terminates: the first neglected power is the dropped mass
        tail = wick_product(term, G)
        total = ChaosElement(total.basis, total.ranks, total.coefs, True, total.dropped + tail.dropped / (F.basis.order + 1))
    return total * math.exp(c0)


def noise_kernel_cells(beta: float, t: float, grid: TimeGrid) -> np.ndarray:
    """Cell averages of ``(t-u)_+^(beta-1) / Gamma(beta)``.

    The cell holding ``u = t`` gets the exact integral over its part with
    ``u < t``; when ``t`` is an edge that is the whole cell to its left.
    """
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta={beta} outside (0, 1/2)")
    if not grid.contains(t):
        raise ValueError(f"t={t} outside grid [{grid.t_min}, {grid.t_max}]")
    e = grid.edges
    num = pow_plus(t - e[:-1], beta) - pow_plus(t - e[1:], beta)
    return num / (grid.h * special.gamma(beta + 1.0))


def noise_element(beta: float, t: float, basis: BasisSpec) -> ChaosElement:
    """First-chaos element with kernel ``y (t-u)_+^(beta-1) / Gamma(beta)``."""
    return ChaosElement.first_chaos(basis, basis.project_separable(noise_kernel_cells(beta, t, basis.grid)))


def flp_element(beta: float, t: float, basis: BasisSpec) -> ChaosElement:
    """``X^beta_t`` as a first-chaos element (exact indicator-kernel cell averages)."""
    from .frac_ops import indicator_kernel_weights

    k = indicator_kernel_weights(t, beta, basis.grid).values
    return ChaosElement.first_chaos(basis, basis.project_separable(k))


def _proxy_weights_words(space: MultiIndexSpace, words: np.ndarray, p: float) -> np.ndarray:
    present = words != space.sentinel
    k = np.where(present, words, 0).astype(np.float64)
    fac = np.where(present, (k + 2.0) ** (-2.0 * p), 1.0).prod(axis=1)
    return space.factorials(words) / special.factorial(present.sum(axis=1)) * fac


@lru_cache(maxsize=32)
def _proxy_weights_cached(d: int, order: int, p: float) -> np.ndarray:
    space = multi_index_space(d, order)
    w = _proxy_weights_words(space, space.words, p)
    w.setflags(write=False)
    return w


def proxy_weights(space: MultiIndexSpace, p: float) -> np.ndarray:
    """Squared grid-proxy weight of every multi-index of ``space`` (dense order)."""
    return _proxy_weights_cached(space.d, space.order, float(p))


def distribution_norm(
    F: ChaosElement, p: float, basis_mode: str = "grid_proxy", n_h: int = 256, with_tail: bool = False
):
    """Weighted chaos norm of ``F``.

    ``grid_proxy``: ``sqrt(sum_alpha c_alpha^2 alpha!/|alpha|! prod_k (rank_k + 1)^(-2p alpha_k))``
    with ranks ``1..d`` in (time cell, mark atom) order.

    ``hermite_first_chaos``: for ``F = <C_1, y k(u)>``,
    ``sqrt(m2 sum_{n=1}^{n_h} (n+1)^(-2p) <k, xi_n>^2)`` with ``xi_n = psi_{n-1}``.
    ``with_tail=True`` returns ``(norm, relative_tail_of_squared_sum)``.
    """
    if not p > 1:
        raise ValueError(f"p={p} must exceed 1")
    if basis_mode == "grid_proxy":
        if F.nnz == 0:
            return (0.0, 0.0) if with_tail else 0.0
        wts = _proxy_weights_words(F.basis.space, F.words, p)
        val = float(np.sqrt(np.sum(F.coefs**2 * wts)))
        return (val, 0.0) if with_tail else val
    if basis_mode == "hermite_first_chaos":
        from .hermite import hermite_coefficients_cells, weighted_hermite_sum

        if F.nnz and np.any(F.degrees != 1):
            raise ValueError("hermite_first_chaos needs a pure first-chaos element")
        if F.nnz == 0:
            return (0.0, 0.0) if with_tail else 0.0
        k = F.basis.time_kernel(F.first_chaos_coeffs())
        c = hermite_coefficients_cells(k, F.basis.grid.edges, n_h)
        ws = weighted_hermite_sum(c, p)
        val = float(np.sqrt(F.basis.m2 * ws.value))
        return (val, ws.relative_tail) if with_tail else val
    raise ValueError(f"unknown basis_mode {basis_mode!r}")


# dense families ------------------------------------------------------------------


def wick_first_order(data: np.ndarray, c0, c1, space: MultiIndexSpace):
    """Wick product of dense rows with ``c0 + sum_k c1[..., k] K_{e_k}``.

    ``data`` has shape ``(..., size)``; ``c0`` broadcasts against
    ``data[..., 0]`` and ``c1`` against ``data[..., 0, None]`` with a
    trailing axis of length ``d``. Returns ``(out, dropped)``.
    """
    c0 = np.asarray(c0, dtype=np.float64)
    c1 = np.asarray(c1, dtype=np.float64)
    out = data * c0[..., None]
    dropped = 0.0
    succ = space.succ
    for k in range(space.d):
        ck = c1[..., k]
        if not np.any(ck):
            continue
        col = succ[:, k]
        ok = col >= 0
        out[..., col[ok]] += data[..., ok] * ck[..., None]
        if not ok.all():
            dropped += float(np.abs(data[..., ~ok] * ck[..., None]).sum())
    return out, dropped
