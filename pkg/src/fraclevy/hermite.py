"""Hermite functions and Hermite coefficients of power-law kernels.

``psi_n`` are the L2-normalized Hermite functions. The weighted sums use the
one-based labelling ``xi_n = psi_{n-1}``, ``n >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

# psi_n is negligible beyond |x| ~ sqrt(2n+1) + a few; 36 covers n <= 512
SUPPORT = 36.0


def hermite_functions(n_max: int, x) -> np.ndarray:
    """``psi_0 .. psi_{n_max-1}`` at ``x``, shape ``(n_max,) + x.shape``.

    Three-term recurrence ``psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}``,
    stable for all ``n`` in double precision.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((n_max,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_coefficients_cells(values, edges, n_max: int, n_gauss: int = 8) -> np.ndarray:
    """``<k, psi_n>`` for the piecewise-constant ``k`` given by cell ``values``.

    Cells wider than 0.05 are subdivided so that the quadrature resolves the
    oscillation of ``psi_n`` up to ``n ~ 500``.
    """
    values = np.asarray(values, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    total = np.zeros(n_max)
    for v, a, b in zip(values, edges[:-1], edges[1:]):
        if v == 0.0 or b <= -SUPPORT or a >= SUPPORT:
            continue
        a, b = max(a, -SUPPORT), min(b, SUPPORT)
        n_sub = max(1, int(np.ceil((b - a) / 0.05)))
        sub = np.linspace(a, b, n_sub + 1)
        mid = 0.5 * (sub[:-1] + sub[1:])[:, None]
        half = 0.5 * (sub[1:] - sub[:-1])[:, None]
        pts = (mid + half * x).ravel()
        wts = (half * w).ravel()
        total += v * hermite_functions(n_max, pts) @ wts
    return total


def _power_pieces(t: float, beta: float, n_panels: int = 200, panel: float = 0.02, order: int = 16):
    """Nodes and weights for ``int_{-inf}^t (t-u)^(beta-1) f(u) du``.

    Near the singularity (``0 < t-u < 1``) the substitution ``w = (t-u)^beta``
    makes the integrand smooth; beyond, plain Gauss-Legendre panels.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    # v in (0, 1): dv v^(beta-1) = dw / beta with w = v^beta in (0, 1)
    e = np.linspace(0.0, 1.0, n_panels + 1)
    mid = 0.5 * (e[:-1] + e[1:])[:, None]
    half = 0.5 * (e[1:] - e[:-1])[:, None]
    ww = (mid + half * x).ravel()
    near_v = ww ** (1.0 / beta)
    near_w = (half * w).ravel() / beta
    far_len = t + SUPPORT - 1.0
    n_far = max(1, int(np.ceil(far_len / panel)))
    e = np.linspace(1.0, 1.0 + far_len, n_far + 1)
    mid = 0.5 * (e[:-1] + e[1:])[:, None]
    half = 0.5 * (e[1:] - e[:-1])[:, None]
    far_v = (mid + half * x).ravel()
    far_w = (half * w).ravel() * far_v ** (beta - 1.0)
    v = np.concatenate([near_v, far_v])
    return t - v, np.concatenate([near_w, far_w])


def hermite_coefficients_power(t: float, beta: float, n_max: int) -> np.ndarray:
    """``<(t - .)_+^(beta-1), psi_n>`` for ``n < n_max`` by singularity-adapted quadrature."""
    u, wts = _power_pieces(t, beta)
    return hermite_functions(n_max, u) @ wts


@dataclass(frozen=True)
class WeightedSum:
    """``sum_{n=1}^{N} (n+1)^(-2p) c_n^2`` with a power-law tail estimate."""

    value: float
    tail: float
    n_terms: int

    @property
    def relative_tail(self) -> float:
        return self.tail / self.value if self.value > 0 else 0.0


def weighted_hermite_sum(coeffs, p: float, block: int = 16, n_blocks: int = 4) -> WeightedSum:
    """Weighted square sum of ``coeffs[n-1] = <k, xi_n>``, ``n = 1..N``.

    Single terms oscillate, so the tail beyond ``N`` is estimated from block
    sums of the last ``n_blocks * block`` terms: fit ``B_j ~ C block n_j^(-q)``
    and integrate ``C n^(-q)`` from ``N`` to infinity.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    n = np.arange(1, c.size + 1, dtype=np.float64)
    terms = (n + 1.0) ** (-2.0 * p) * c * c
    value = float(terms.sum())
    tail = 0.0
    span = block * n_blocks
    if c.size >= span and value > 0:
        sums = terms[-span:].reshape(n_blocks, block).sum(axis=1)
        centers = n[-span:].reshape(n_blocks, block).mean(axis=1)
        if np.all(sums > 0):
            slope, icpt = np.polyfit(np.log(centers), np.log(sums / block), 1)
            q = -slope
            if q > 1.0:
                tail = float(np.exp(icpt) * c.size ** (1.0 - q) / (q - 1.0))
            else:
                tail = np.inf
    return WeightedSum(value, tail, int(c.size))


def power_kernel_norm(t: float, beta: float, p: float, n_h: int = 256, m2: float = 1.0, s=None) -> WeightedSum:
    """``m2 / Gamma(b)^2 * sum (n+1)^(-2p) <(t-.)^(b-1) - (s-.)^(b-1), xi_n>^2``.

    With ``s=None`` only the ``t`` kernel is used.
    """
    c = hermite_coefficients_power(t, beta, n_h)
    if s is not None:
        c = c - hermite_coefficients_power(s, beta, n_h)
    ws = weighted_hermite_sum(c, p)
    scale = m2 / special.gamma(beta) ** 2
    return WeightedSum(scale * ws.value, scale * ws.tail, ws.n_terms)
