"""Moving-average simulation of fractional Levy paths.

``X^b_t = sum_c Mbar_b(t, c) dX_c`` where ``dX_c`` are increments of the
driving process over cells ``c`` and ``Mbar`` is the exact cell average of
``((t-s)_+^b - (-s)_+^b) / Gamma(b+1)``. Cells are the uniform grid plus an
optional far-past extension of geometrically growing cells, which lets the
history reach ``|s| ~ 1e13`` for a few hundred extra cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from . import _kernels
from .frac_ops import (
    flp_variance_closed_form,
    moving_average_weights,
    required_horizon,
    truncation_deficit_bound,
)
from .grid import TimeGrid, pow_increment
from .levy_models import BLOCK_SIZE, DiscretizedMeasure, LevyModel, sample_increments, second_moment

GEOMETRIC_RATIO = 1.05


@dataclass(frozen=True)
class HistoryPartition:
    """Uniform grid preceded by geometric far-past cells.

    ``far_edges`` is ascending and ends at ``grid.t_min``; it is empty when
    the history is the grid alone.
    """

    grid: TimeGrid
    far_edges: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.far_edges, dtype=np.float64)
        if f.size == 1:
            raise ValueError("far_edges needs at least two points or none")
        if f.size and (not np.all(np.diff(f) > 0) or not np.isclose(f[-1], self.grid.t_min)):
            raise ValueError("far_edges must increase and end at grid.t_min")
        f.setflags(write=False)
        object.__setattr__(self, "far_edges", f)

    @classmethod
    def build(cls, grid: TimeGrid, horizon: float = 0.0, ratio: float = GEOMETRIC_RATIO):
        """Extend ``grid`` to reach ``-horizon`` with cells growing by ``ratio``."""
        if horizon <= -grid.t_min:
            return cls(grid, np.empty(0))
        lo = -grid.t_min
        n = int(np.ceil(np.log(horizon / lo) / np.log(ratio)))
        far = -lo * ratio ** np.arange(n, -1, -1, dtype=np.float64)
        far[-1] = grid.t_min
        return cls(grid, far)

    @property
    def n_far(self) -> int:
        return max(self.far_edges.size - 1, 0)

    @property
    def n_cells(self) -> int:
        return self.n_far + self.grid.n_cells

    @property
    def edges(self) -> np.ndarray:
        if self.n_far == 0:
            return self.grid.edges
        return np.concatenate([self.far_edges[:-1], self.grid.edges])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def horizon(self) -> float:
        return float(-self.edges[0])


@dataclass(frozen=True)
class TruncationReport:
    """Variance bookkeeping for ``X^b_t`` at one time ``t``.

    ``tail_bound`` bounds the squared-kernel mass beyond the history
    horizon; ``discrete_ratio`` is the variance of the discretized path
    divided by the exact variance.
    """

    t: float
    horizon: float
    tail_bound: float
    exact_variance: float
    discrete_variance: float

    @property
    def relative_tail(self) -> float:
        return self.tail_bound / self.exact_variance if self.exact_variance > 0 else 0.0

    @property
    def discrete_ratio(self) -> float:
        return self.discrete_variance / self.exact_variance if self.exact_variance > 0 else 1.0


@dataclass(frozen=True)
class PathSample:
    """A batch of fractional Levy paths sharing one grid.

    ``values[p, k]`` is path ``p`` at ``times[k]``; ``increments`` are the
    driving increments over the cells of ``partition``.
    """

    partition: HistoryPartition
    beta: float
    times: np.ndarray
    values: np.ndarray
    increments: Optional[np.ndarray]
    seed: Optional[int]
    report: Optional[TruncationReport]

    @property
    def grid(self) -> TimeGrid:
        return self.partition.grid

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[k], t, rtol=0, atol=1e-9):
            raise KeyError(f"t={t} is not a sampled time")
        return self.values[:, k]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return self.n_paths


def _check_beta(beta):
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta={beta} outside (0, 1/2)")


def truncation_report(partition: HistoryPartition, beta: float, t: float, m2: float = 1.0):
    w = moving_average_weights(t, beta, partition.edges[:-1], partition.edges[1:])
    return TruncationReport(
        t=float(t),
        horizon=partition.horizon,
        tail_bound=m2 * truncation_deficit_bound(t, beta, partition.horizon),
        exact_variance=flp_variance_closed_form(t, beta, m2),
        discrete_variance=float(m2 * np.dot(w**2, partition.widths)),
    )


def plan_history(grid: TimeGrid, beta: float, budget: float = 0.01, history: str = "auto",
                 history_tol: float = 1e-4) -> HistoryPartition:
    """Pick the far-past extension for ``grid``.

    ``history="none"`` uses the grid alone and raises when the tail beyond
    ``grid.t_min`` may exceed ``budget`` of ``Var X_{t_max}``. ``"auto"``
    appends geometric cells until the tail is below ``history_tol``.
    """
    _check_beta(beta)
    if grid.t_min >= 0:
        raise ValueError("the grid must start at a negative time")
    t = grid.t_max
    var = flp_variance_closed_form(t, beta)
    if history == "none":
        if truncation_deficit_bound(t, beta, -grid.t_min) > budget * var:
            need = required_horizon(t, beta, budget * var)
            raise ValueError(
                f"variance deficit above {budget:.0%} at t={t}: need t_min <= {-need:.4g} "
                "(or history='auto')"
            )
        return HistoryPartition(grid, np.empty(0))
    if history != "auto":
        raise ValueError(f"history must be 'auto' or 'none', got {history!r}")
    return HistoryPartition.build(grid, required_horizon(t, beta, history_tol * var))


def moving_average(
    increments: np.ndarray, partition: HistoryPartition, beta: float, times=None
) -> np.ndarray:
    """Apply the cell-averaged moving-average kernel to increments.

    ``times=None`` evaluates at every edge of ``partition``; uniform-grid
    edges go through one causal convolution, the rest through dense
    weights.
    """
    x = np.ascontiguousarray(np.atleast_2d(increments), dtype=np.float64)
    if x.shape[1] != partition.n_cells:
        raise ValueError(f"expected {partition.n_cells} increments per path, got {x.shape[1]}")
    edges = partition.edges
    nf = partition.n_far
    if times is not None:
        t = np.asarray(times, dtype=np.float64)
        w = moving_average_weights(t[:, None], beta, edges[None, :-1], edges[None, 1:])
        return x @ w.T
    grid = partition.grid
    e0 = grid.edge_index(0.0)
    out = np.empty((x.shape[0], edges.size))
    n = grid.n_cells
    m = np.arange(n + 1, dtype=np.float64)
    q = pow_increment(np.maximum(m - 1.0, 0.0), np.minimum(m, 1.0), beta + 1.0)
    conv = _kernels.causal_convolve(np.ascontiguousarray(x[:, nf:]), q, n + 1)
    out[:, nf:] = grid.h**beta / special.gamma(beta + 2.0) * (conv - conv[:, e0 : e0 + 1])
    if nf:
        w_far = moving_average_weights(
            grid.edges[:, None], beta, edges[None, :nf], edges[None, 1 : nf + 1]
        )
        out[:, nf:] += x[:, :nf] @ w_far.T
        far_t = edges[:nf]
        w = moving_average_weights(far_t[:, None], beta, edges[None, :-1], edges[None, 1:])
        out[:, :nf] = x @ w.T
    return out


def simulate_flp_paths(
    model: LevyModel,
    beta: float,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    times: Optional[Sequence[float]] = None,
    measure: Optional[DiscretizedMeasure] = None,
    budget: float = 0.01,
    history: str = "auto",
    keep_increments: bool = False,
) -> PathSample:
    """Simulate ``n_paths`` paths of ``X^beta``.

    Parameters
    ----------
    model, measure : driving Levy law (``measure`` for infinite activity).
    beta : float in (0, 1/2).
    grid : uniform grid with ``t_min < 0``; ``0`` must be an edge.
    times : evaluation times; defaults to the edges in ``[0, t_max]``.
    history : ``"auto"`` (geometric far past) or ``"none"`` (grid only,
        raising if the variance deficit exceeds ``budget``).

    Paths are generated in blocks of ``BLOCK_SIZE``; path ``i`` depends only
    on ``(seed, i)``.
    """
    _check_beta(beta)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    grid.edge_index(0.0)
    part = plan_history(grid, beta, budget, history)
    edges = part.edges
    nonneg = edges >= -1e-12 * grid.h
    out_times = edges[nonneg] if times is None else np.asarray(times, dtype=np.float64)
    if np.any(out_times > grid.t_max + 1e-12) or np.any(out_times < edges[0]):
        raise ValueError("requested times outside the grid")
    widths = part.widths
    values = np.empty((n_paths, out_times.size))
    kept = np.empty((n_paths, part.n_cells)) if keep_increments else None
    for start in range(0, n_paths, BLOCK_SIZE):
        stop = min(start + BLOCK_SIZE, n_paths)
        inc = sample_increments(model, widths, seed, stop - start, measure, first_path=start).increments
        if times is None:
            values[start:stop] = moving_average(inc, part, beta)[:, nonneg]
        else:
            values[start:stop] = moving_average(inc, part, beta, out_times)
        if keep_increments:
            kept[start:stop] = inc
    m2 = measure.m2 if measure is not None else second_moment(model)
    report = truncation_report(part, beta, grid.t_max, m2)
    values.setflags(write=False)
    return PathSample(part, float(beta), out_times, values, kept, int(seed), report)


def flp_at_edges(increments: np.ndarray, partition: HistoryPartition, beta: float) -> np.ndarray:
    """``X^beta`` at every partition edge (negative times included)."""
    _check_beta(beta)
    return moving_average(increments, partition, beta)


def transform_alpha_to_beta(
    x_alpha_edges: np.ndarray, alpha: float, beta: float, partition: HistoryPartition
) -> PathSample:
    """Turn an ``X^alpha`` path into ``X^beta`` with the ``(beta-alpha)`` kernel.

    ``x_alpha_edges`` holds ``X^alpha`` at every edge of ``partition``
    (shape ``(n_paths, n_edges)``); its cell increments are fed through the
    moving-average kernel of order ``beta - alpha``, normalized by
    ``Gamma(beta - alpha + 1)``.
    """
    if not 0.0 < alpha < beta < 0.5:
        raise ValueError(f"need 0 < alpha < beta < 1/2, got alpha={alpha}, beta={beta}")
    xa = np.atleast_2d(np.asarray(x_alpha_edges, dtype=np.float64))
    if xa.shape[1] != partition.n_cells + 1:
        raise ValueError("x_alpha_edges must have one value per partition edge")
    d = np.diff(xa, axis=1)
    full = moving_average(d, partition, beta - alpha)
    keep = partition.edges >= -1e-12 * partition.grid.h
    vals = full[:, keep]
    vals.setflags(write=False)
    return PathSample(partition, float(beta), partition.edges[keep], vals, None, None, None)


@dataclass(frozen=True)
class MomentRow:
    t: float
    mean: float
    variance: float
    stderr_mean: float
    stderr_variance: float


def empirical_moments(paths: PathSample, t_list: Optional[Sequence[float]] = None) -> list:
    """Unbiased mean and variance per time, with standard errors.

    The variance standard error uses the fourth central moment, so it is
    valid for the heavy-tailed compound Poisson marginals as well.
    """
    if paths.n_paths < 2:
        raise ValueError("need at least two paths")
    times = paths.times if t_list is None else t_list
    rows = []
    for t in times:
        v = paths.at(float(t))
        n = v.size
        mean = float(v.mean())
        var = float(v.var(ddof=1))
        c = v - mean
        m4 = float(np.mean(c**4))
        se_var = float(np.sqrt(max(m4 - var**2 * (n - 3) / (n - 1), 0.0) / n))
        rows.append(MomentRow(float(t), mean, var, float(np.sqrt(var / n)), se_var))
    return rows


def covariance_oracle(s: float, t: float, beta: float, m2: float = 1.0) -> float:
    """``m2 * int M(s, u) M(t, u) du`` by adaptive quadrature."""
    g = special.gamma(beta + 1.0)

    def k(x, u):
        return (max(x - u, 0.0) ** beta - max(-u, 0.0) ** beta) / g

    lo, hi = min(s, t, 0.0), max(s, t, 0.0)
    f = lambda u: k(s, u) * k(t, u)
    brk = sorted({lo, 0.0, min(s, t), hi})
    near = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(brk[:-1], brk[1:]) if b > a)
    # far past in decades, then the leading-order power tail beyond 1e8
    v = max(-lo, 1.0) * np.logspace(0, 8, 9)
    v = np.concatenate([[-lo], v]) if v[0] > -lo else v
    far = sum(integrate.quad(f, -b, -a, limit=200, epsrel=1e-11)[0] for a, b in zip(v[:-1], v[1:]))
    far += s * t * beta**2 * v[-1] ** (2 * beta - 1) / ((1 - 2 * beta) * g**2)
    return m2 * (near + far)
