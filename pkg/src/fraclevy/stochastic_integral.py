"""Skorohod integrals in the chaos algebra and pathwise Wiener integrals."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .chaos import BasisSpec, ChaosElement, noise_element, wick_product
from .frac_ops import moving_average_weights, rl_fractional_integral, rl_integral_coeffwise
from .grid import GridFunction
from .levy_models import IncrementSample


def _check_family(family: Sequence[ChaosElement], basis: BasisSpec, n: int, what: str):
    if len(family) != n:
        raise ValueError(f"{what} needs {n} elements, got {len(family)}")
    for F in family:
        if not F.basis.same_as(basis):
            raise ValueError(f"{what}: element on a different basis")


def field_weights(basis: BasisSpec) -> np.ndarray:
    """``<1_k, e_k>_pi`` factor turning a basis-indexed integrand into a chaos shift.

    Atoms: ``sqrt(w_k)``. Separable: integrands are ``y G(i)`` and the factor
    is ``sqrt(h m2)``.
    """
    if basis.mark_mode == "atoms":
        return np.sqrt(basis.weights)
    return np.full(basis.d, np.sqrt(basis.grid.h * basis.m2))


def skorohod_pjm(G: Sequence[ChaosElement], basis: Optional[BasisSpec] = None) -> ChaosElement:
    """Skorohod integral against the compensated jump measure.

    ``G[k]`` is the integrand on basis cell ``k`` (in separable mode the
    integrand is ``y G[i]`` on time cell ``i``). Coefficients move from
    ``alpha`` to ``alpha + e_k`` with factor :func:`field_weights`.
    """
    basis = basis if basis is not None else G[0].basis
    _check_family(G, basis, basis.d, "skorohod_pjm")
    w = field_weights(basis)
    space = basis.space
    out = ChaosElement.zero(basis)
    if space.dense:
        acc = np.zeros(space.size)
        dropped, flag = 0.0, False
        succ = space.succ
        for k, F in enumerate(G):
            flag |= F.overflow
            dropped += F.dropped
            if F.nnz == 0:
                continue
            tgt = succ[F.ranks, k]
            ok = tgt >= 0
            np.add.at(acc, tgt[ok], w[k] * F.coefs[ok])
            lost = float(np.abs(w[k] * F.coefs[~ok]).sum())
            dropped += lost
            flag |= lost > 0
        return ChaosElement.from_dense(basis, acc, flag, dropped)
    unit = np.zeros(basis.d)
    for k, F in enumerate(G):
        if F.nnz == 0:
            continue
        unit[:] = 0.0
        unit[k] = w[k]
        out = out + wick_product(F, ChaosElement.first_chaos(basis, unit))
    return out


def noise_increment(beta: float, a: float, b: float, basis: BasisSpec) -> ChaosElement:
    """``int_a^b Xdot^beta_s ds = X^beta_b - X^beta_a`` as a first-chaos element."""
    e = basis.grid.edges
    k = moving_average_weights(b, beta, e[:-1], e[1:]) - moving_average_weights(a, beta, e[:-1], e[1:])
    return ChaosElement.first_chaos(basis, basis.project_separable(k))


def skorohod_frac(
    F: Sequence[ChaosElement], beta: float, basis: Optional[BasisSpec] = None, mask=None, rule: str = "cell"
) -> ChaosElement:
    """``delta^beta(F) = int F(s) <> Xdot^beta_s ds`` over the basis time cells.

    ``F[c]`` is the integrand on time cell ``c`` (constant on the cell).
    ``rule="cell"`` pairs it with the exact cell integral of the noise, which
    is exact for piecewise-constant integrands; ``rule="midpoint"`` uses
    ``h * noise_element(beta, center)``. ``mask`` (boolean per cell)
    restricts the integral to a set ``A``.
    """
    basis = basis if basis is not None else F[0].basis
    grid = basis.grid
    _check_family(F, basis, grid.n_cells, "skorohod_frac")
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta={beta} outside (0, 1/2)")
    keep = np.ones(grid.n_cells, bool) if mask is None else np.asarray(mask, bool)
    e = grid.edges
    out = ChaosElement.zero(basis)
    for c, Fc in enumerate(F):
        if not keep[c] or (Fc.nnz == 0 and not Fc.overflow):
            continue
        if rule == "cell":
            dx = noise_increment(beta, e[c], e[c + 1], basis)
        elif rule == "midpoint":
            dx = noise_element(beta, 0.5 * (e[c] + e[c + 1]), basis) * grid.h
        else:
            raise ValueError(f"rule must be 'cell' or 'midpoint', got {rule!r}")
        out = out + wick_product(Fc, dx)
    return out


def _family_coefficients(F: Sequence[ChaosElement]):
    """Union support and a dense ``(n_cells, n_support)`` coefficient table."""
    support = np.unique(np.concatenate([f.ranks for f in F])) if F else np.empty(0, np.int64)
    table = np.zeros((len(F), support.size))
    for c, f in enumerate(F):
        table[c, np.searchsorted(support, f.ranks)] = f.coefs
    return support, table


def rl_family(F: Sequence[ChaosElement], beta: float, side: str = "minus") -> list:
    """Apply ``I^beta_side`` in time to every chaos coefficient of a family."""
    basis = F[0].basis
    support, table = _family_coefficients(F)
    out = rl_integral_coeffwise(table.T, beta, basis.grid.h, side).T if support.size else table
    flag = any(f.overflow for f in F)
    return [ChaosElement(basis, support, row, flag, 0.0) for row in out]


def skorohod_via_kernel(F: Sequence[ChaosElement], beta: float, basis: Optional[BasisSpec] = None) -> ChaosElement:
    """``delta(K^beta F)`` with ``K^beta F(s, y) = y (I^beta_- F)(s)``.

    An independent route to :func:`skorohod_frac`: fractional integration of
    the coefficients in time, then the jump-measure Skorohod integral.
    """
    basis = basis if basis is not None else F[0].basis
    grid = basis.grid
    _check_family(F, basis, grid.n_cells, "skorohod_via_kernel")
    KF = rl_family(F, beta, "minus")
    if basis.mark_mode == "separable":
        return skorohod_pjm(KF, basis)
    # y-weighting on the mark axis
    G = [KF[i] * y for i in range(grid.n_cells) for y in basis.marks.sizes]
    return skorohod_pjm(G, basis)


def fractional_transform_integrand(F: Sequence[ChaosElement], alpha: float, beta: float) -> list:
    """``I^(beta-alpha)_- F``, the integrand with ``delta^alpha(.) = delta^beta(F)``."""
    if not 0.0 < alpha < beta < 0.5:
        raise ValueError(f"need 0 < alpha < beta < 1/2, got alpha={alpha}, beta={beta}")
    return rl_family(F, beta - alpha, "minus")


def wiener_integral_pathwise(g: GridFunction, beta: float, increments: IncrementSample) -> np.ndarray:
    """``sum_cells (I^beta_- g)(cell) dX_cell`` for every sampled path."""
    if increments.increments.shape[1] != g.grid.n_cells:
        raise ValueError("increments do not match the grid of g")
    if not np.allclose(increments.widths, g.grid.h, rtol=1e-12, atol=0):
        raise ValueError("increments were sampled on a different grid")
    k = rl_fractional_integral(g, beta, "minus").values
    return increments.increments @ k


def wiener_integral_element(g: GridFunction, beta: float, basis: BasisSpec) -> ChaosElement:
    """``<C_1, K^beta g>`` on ``basis`` (the chaos counterpart of the pathwise integral)."""
    if not g.grid.same_as(basis.grid):
        raise ValueError("g and basis use different grids")
    return ChaosElement.first_chaos(basis, basis.project_separable(rl_fractional_integral(g, beta, "minus").values))
