"""Riemann-Liouville fractional integrals on uniform grids.

All operators act on piecewise-constant grid functions and return exact
cell averages: the power-law singularity is integrated in closed form, so
no quadrature rule ever touches ``(t - s) ** (beta - 1)`` at ``s = t``.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from . import _kernels
from .grid import GridFunction, TimeGrid, pow_plus, second_difference_power

__all__ = [
    "rl_fractional_integral",
    "rl_weights",
    "indicator_kernel_weights",
    "moving_average_weights",
    "truncation_deficit_bound",
    "required_horizon",
    "flp_variance_closed_form",
    "rl_integral_coeffwise",
]


def _check_beta(beta, upper=1.0):
    if not 0.0 < beta < upper:
        raise ValueError(f"beta={beta} outside admissible range (0, {upper:g})")


def rl_weights(n: int, beta: float, h: float) -> np.ndarray:
    """Cell-to-cell weights ``w[d]`` of the cell-averaged operator.

    ``(I f)_m = sum_d w[d] f_{m +/- d}`` for piecewise-constant ``f``, where
    ``w[d] = h**beta * ((d+1)^(b+1) - 2 d^(b+1) + (d-1)_+^(b+1)) / Gamma(b+2)``.
    """
    d = np.arange(n, dtype=np.float64)
    return h**beta * second_difference_power(d, beta + 1.0) / special.gamma(beta + 2.0)


def _apply(values: np.ndarray, w: np.ndarray, method: str) -> np.ndarray:
    x = np.ascontiguousarray(np.atleast_2d(values), dtype=np.float64)
    n = x.shape[1]
    if method == "auto":
        method = "fft" if n > 256 else "direct"
    if method == "direct":
        impl = _kernels.causal_convolve
    elif method == "fft":
        impl = _kernels.python.causal_convolve
    else:
        raise ValueError(f"unknown method {method!r}")
    return impl(x, w, n)


def rl_fractional_integral(
    f: GridFunction, beta: float, side: str = "minus", method: str = "auto"
) -> GridFunction:
    """Cell averages of ``I^beta_- f`` (right-looking) or ``I^beta_+ f``.

    Parameters
    ----------
    f : GridFunction
        Integrand; zero outside the grid.
    beta : float
        Order in (0, 1).
    side : {"minus", "plus"}
        ``minus``: ``(1/G(b)) int_t^inf (s-t)^(b-1) f(s) ds``;
        ``plus``: ``(1/G(b)) int_-inf^t (t-s)^(b-1) f(s) ds``.
    method : {"auto", "direct", "fft"}
        Direct O(n^2) sum (compiled when available) or FFT convolution;
        both produce the same values to rounding.
    """
    _check_beta(beta)
    w = rl_weights(f.grid.n_cells, beta, f.grid.h)
    if side == "plus":
        out = _apply(f.values, w, method)[0]
    elif side == "minus":
        out = _apply(f.values[::-1], w, method)[0][::-1]
    else:
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    return GridFunction(f.grid, out)


def rl_integral_coeffwise(values: np.ndarray, beta: float, h: float, side="minus", method="auto"):
    """Apply the cell-averaged operator along the last axis of a 2-D array."""
    _check_beta(beta)
    v = np.atleast_2d(np.asarray(values, dtype=np.float64))
    w = rl_weights(v.shape[1], beta, h)
    if side == "plus":
        return _apply(v, w, method)
    return _apply(v[:, ::-1], w, method)[:, ::-1]


def _pow_shift(y, dx, g):
    """``(y+dx)_+**g - y_+**g`` without forming ``y+dx`` when ``|y| >> |dx|``."""
    y, dx = np.broadcast_arrays(np.asarray(y, dtype=np.float64), np.asarray(dx, dtype=np.float64))
    x = y + dx
    both = (x > 0) & (y > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        close = np.abs(y) ** g * np.expm1(g * np.log1p(dx / y))
    return np.where(both, close, pow_plus(x, g) - pow_plus(y, g))


def moving_average_weights(t, beta: float, a, b) -> np.ndarray:
    """Averages over cells ``[a, b]`` of ``((t-s)_+^b - (-s)_+^b) / Gamma(b+1)``.

    ``t``, ``a``, ``b`` broadcast; cells may be of any width (the far-past
    history uses geometric cells reaching ``|s| ~ 1e18``, hence the
    cancellation-free power differences).
    """
    t = np.asarray(t, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    g = beta + 1.0
    num = _pow_shift(-a, t, g) - _pow_shift(-b, t, g)
    return num / ((b - a) * special.gamma(beta + 2.0))


def indicator_kernel_weights(t: float, beta: float, grid: TimeGrid) -> GridFunction:
    """Exact cell averages of ``M(t, s) = ((t-s)_+^b - (-s)_+^b) / Gamma(b+1)``.

    These are the Wiener-integral weights of ``X^beta_t`` against cell
    increments of the driving process.
    """
    _check_beta(beta, 0.5)
    if not grid.contains(t):
        raise ValueError(f"t={t} outside grid [{grid.t_min}, {grid.t_max}]")
    e = grid.edges
    return GridFunction(grid, moving_average_weights(t, beta, e[:-1], e[1:]))


def truncation_deficit_bound(t: float, beta: float, horizon: float) -> float:
    """Upper bound on ``int_{-inf}^{-horizon} M(t, s)^2 ds`` for ``horizon > 0``.

    Uses ``(t+v)^b - v^b <= b t v^(b-1)``.
    """
    _check_beta(beta, 0.5)
    if horizon <= 0:
        return np.inf
    g = special.gamma(beta + 1.0)
    return (beta * t) ** 2 * horizon ** (2 * beta - 1) / ((1 - 2 * beta) * g**2)


def required_horizon(t: float, beta: float, budget: float) -> float:
    """Smallest ``horizon`` with ``truncation_deficit_bound <= budget``."""
    g = special.gamma(beta + 1.0)
    return (budget * (1 - 2 * beta) * g**2 / (beta * t) ** 2) ** (1.0 / (2 * beta - 1))


def flp_variance_closed_form(t: float, beta: float, m2: float = 1.0) -> float:
    """``m2 * ||M(t, .)||^2 = m2 t^(2b+1) / (Gamma(2b+2) cos(pi b))``."""
    return m2 * abs(t) ** (2 * beta + 1) / (special.gamma(2 * beta + 2) * np.cos(np.pi * beta))
