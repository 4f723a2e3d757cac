"""Uniform time grids, grid functions and exact power-law cell integrals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of ``[t_min, t_max]`` into ``n_cells`` cells.

    Functions living on the grid are piecewise constant (cell averages);
    anything outside ``[t_min, t_max]`` is treated as zero.
    """

    t_min: float
    t_max: float
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells!r}")
        if not (np.isfinite(self.t_min) and np.isfinite(self.t_max)):
            raise ValueError("grid bounds must be finite")
        if self.t_max <= self.t_min:
            raise ValueError(f"need t_min < t_max, got [{self.t_min}, {self.t_max}]")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @classmethod
    def from_step(cls, t_min: float, t_max: float, h: float) -> "TimeGrid":
        """Grid with step ``h``; ``(t_max - t_min) / h`` must be (close to) an integer."""
        n = (t_max - t_min) / h
        n_round = int(round(n))
        if n_round < 1 or abs(n - n_round) > 1e-8 * max(1.0, n):
            raise ValueError(f"step {h} does not divide [{t_min}, {t_max}]")
        return cls(float(t_min), float(t_max), n_round)

    @property
    def h(self) -> float:
        return (self.t_max - self.t_min) / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return self.t_min + self.h * np.arange(self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.t_min + self.h * (np.arange(self.n_cells) + 0.5)

    def edge_index(self, t: float, tol: float = 1e-9) -> int:
        """Index of the edge located at ``t``; raises if ``t`` is not an edge."""
        x = (t - self.t_min) / self.h
        i = int(round(x))
        if abs(x - i) > tol or not 0 <= i <= self.n_cells:
            raise ValueError(f"t={t} is not a cell edge of {self}")
        return i

    def cell_index(self, t: float) -> int:
        """Index of the cell containing ``t`` (right-closed at ``t_max``)."""
        if not self.t_min <= t <= self.t_max:
            raise ValueError(f"t={t} outside grid [{self.t_min}, {self.t_max}]")
        return min(int((t - self.t_min) / self.h), self.n_cells - 1)

    def contains(self, t: float) -> bool:
        return self.t_min <= t <= self.t_max

    def same_as(self, other: "TimeGrid") -> bool:
        return (
            self.n_cells == other.n_cells
            and np.isclose(self.t_min, other.t_min, rtol=0, atol=1e-12 * max(1.0, abs(self.t_min)))
            and np.isclose(self.t_max, other.t_max, rtol=0, atol=1e-12 * max(1.0, abs(self.t_max)))
        )


@dataclass(frozen=True)
class GridFunction:
    """Cell averages of a real function on ``grid``."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(f"expected {self.grid.n_cells} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: TimeGrid, f, n_gauss: int = 8) -> "GridFunction":
        """Cell averages of ``f`` by Gauss-Legendre on every cell."""
        x, w = np.polynomial.legendre.leggauss(n_gauss)
        pts = grid.centers[:, None] + 0.5 * grid.h * x[None, :]
        return cls(grid, (np.asarray(f(pts)) * w).sum(axis=1) / 2.0)

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "GridFunction":
        return cls(grid, np.zeros(grid.n_cells))

    def _check(self, other: "GridFunction"):
        if not self.grid.same_as(other.grid):
            raise ValueError("grid mismatch")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float):
        return GridFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.h)

    def inner(self, other: "GridFunction") -> float:
        self._check(other)
        return float(np.dot(self.values, other.values) * self.grid.h)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.inner(self)))


def indicator(grid: TimeGrid, t: float) -> GridFunction:
    """Signed indicator: 1 on (0, t), -1 on (t, 0), as exact cell averages."""
    lo, hi = (0.0, t) if t >= 0 else (t, 0.0)
    sign = 1.0 if t >= 0 else -1.0
    e = grid.edges
    overlap = np.clip(np.minimum(e[1:], hi) - np.maximum(e[:-1], lo), 0.0, None)
    return GridFunction(grid, sign * overlap / grid.h)


def pow_plus(x, g):
    """``x_+ ** g`` with ``0`` for ``x <= 0``."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, np.abs(x) ** g, 0.0)


def pow_increment(x, d, g):
    """``(x + d)**g - x**g`` for ``x >= 0, d >= 0`` without cancellation."""
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = x**g * np.expm1(g * np.log1p(d / x))
        tiny = np.abs(d) ** g
    return np.where(x > 0, stable, tiny)


def power_cell_integral(t, a, b, g):
    """``int_a^b (t - s)_+ ** g ds`` for ``a <= b`` and ``g > -1``."""
    t, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (t, a, b)))
    lo = t - b  # distance at the right end
    hi = t - a
    full = pow_increment(np.maximum(lo, 0.0), hi - np.maximum(lo, 0.0), g + 1.0)
    return np.where(hi > 0, full, 0.0) / (g + 1.0)


def second_difference_power(d, g):
    """``(d+1)_+**g - 2 d_+**g + (d-1)_+**g`` for integer ``d`` (series for large ``d``)."""
    d = np.asarray(d, dtype=np.float64)
    out = pow_plus(d + 1, g) - 2 * pow_plus(d, g) + pow_plus(d - 1, g)
    big = d >= 8
    if np.any(big):
        x = 1.0 / d[big]
        s = np.zeros_like(x)
        coef = 1.0
        # (1+x)^g + (1-x)^g - 2 = 2 * sum_{k>=1} C(g, 2k) x^{2k}
        for k in range(1, 16):
            coef = coef * (g - 2 * k + 2) * (g - 2 * k + 1) / ((2 * k - 1) * (2 * k))
            s += coef * x ** (2 * k)
        out[big] = 2.0 * d[big] ** g * s
    return out
