"""Wick-affine SDEs ``dU = b(U) dt + sigma(U) <> Xdot^beta_t dt`` by Picard iteration.

Coefficients have the form ``F(U) = c0 + c1 <> U``. The integral equation is
discretized on nodes ``t_m = m T / n`` with the trapezoid rule for both terms,

    U_m = U0 + sum_{l<m} [ h/2 (b(U_l) + b(U_{l+1}))
                           + (sigma(U_l) + sigma(U_{l+1}))/2 <> dX_l ],

which coincides with the node discretization used by :mod:`fraclevy.volterra`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .chaos import BasisSpec, ChaosElement, distribution_norm, noise_element, proxy_weights, wick_first_order
from .hermite import power_kernel_norm
from .stochastic_integral import noise_increment
from .volterra import DivergenceError, VolterraSolution, _row_norms

# dense operator matrices are built only up to this chaos dimension
OPERATOR_LIMIT = 4000


def _as_element(x, basis: BasisSpec) -> ChaosElement:
    if isinstance(x, ChaosElement):
        if not x.basis.same_as(basis):
            raise ValueError("coefficient element on a different basis")
        return x
    return ChaosElement.constant(basis, float(x))


@dataclass(frozen=True, eq=False)
class WickAffineCoefficient:
    """``F(U) = c0 + c1 <> U``."""

    c0: ChaosElement
    c1: ChaosElement

    @classmethod
    def make(cls, basis: BasisSpec, c0=0.0, c1=0.0) -> "WickAffineCoefficient":
        return cls(_as_element(c0, basis), _as_element(c1, basis))

    def __post_init__(self):
        if not self.c0.basis.same_as(self.c1.basis):
            raise ValueError("c0 and c1 live on different bases")

    @property
    def basis(self) -> BasisSpec:
        return self.c0.basis

    @property
    def is_zero(self) -> bool:
        return self.c0.nnz == 0 and self.c1.nnz == 0

    @property
    def first_order(self) -> bool:
        """``c1`` has no chaos components above order one."""
        return self.c1.nnz == 0 or int(self.c1.degrees.max()) <= 1

    def multiply(self, data: np.ndarray):
        """``c1 <> U`` for dense rows ``data`` of shape ``(..., size)``; returns ``(out, dropped)``."""
        space = self.basis.space
        if self.c1.nnz == 0:
            return np.zeros_like(data), 0.0
        if self.first_order:
            c1 = self.c1.dense()
            return wick_first_order(data, c1[0], c1[1 : space.d + 1], space)
        flat = np.ascontiguousarray(data.reshape(-1, space.size))
        out, lost = _kernels.wick_dense(
            flat, np.ascontiguousarray(self.c1.coefs), np.ascontiguousarray(self.c1.words), space.succ, space.sentinel
        )
        return out.reshape(data.shape), float(lost)

    def __call__(self, data: np.ndarray):
        out, lost = self.multiply(data)
        out[..., self.c0.ranks] += self.c0.coefs
        return out, lost

    def operator_matrix(self) -> np.ndarray:
        """Dense matrix of ``U -> c1 <> U`` in chaos coordinates."""
        size = self.basis.space.size
        if size > OPERATOR_LIMIT:
            raise ValueError(f"chaos dimension {size} exceeds {OPERATOR_LIMIT} for a dense operator")
        out, _ = self.multiply(np.eye(size))
        return out.T

    def lipschitz(self, p: float = 2.0) -> float:
        """Operator norm of ``U -> c1 <> U`` in the grid-proxy norm."""
        if self.c1.nnz == 0:
            return 0.0
        sw = np.sqrt(proxy_weights(self.basis.space, p))
        A = sw[:, None] * self.operator_matrix() / sw[None, :]
        return float(np.linalg.norm(A, 2))


@dataclass(frozen=True, eq=False)
class SdeProblem:
    U0: ChaosElement
    b: WickAffineCoefficient
    sigma: WickAffineCoefficient
    beta: float
    horizon: float
    n_steps: int

    def __post_init__(self):
        if not 0.0 < self.beta < 0.5:
            raise ValueError(f"beta={self.beta} outside (0, 1/2)")
        if self.horizon <= 0 or self.n_steps < 1:
            raise ValueError("need horizon > 0 and n_steps >= 1")
        for name, c in (("b", self.b), ("sigma", self.sigma)):
            if not c.basis.same_as(self.U0.basis):
                raise ValueError(f"{name} and U0 live on different bases")
        g = self.basis.grid
        if g.t_min > 0 or g.t_max < self.horizon - 1e-12:
            raise ValueError(f"basis grid [{g.t_min}, {g.t_max}] does not cover [0, {self.horizon}]")

    @property
    def basis(self) -> BasisSpec:
        return self.U0.basis

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    @property
    def h(self) -> float:
        return self.horizon / self.n_steps

    def increments(self) -> np.ndarray:
        """First-chaos coefficients of ``dX_l``, shape ``(n_steps, d)``."""
        t = self.times
        return np.array([noise_increment(self.beta, t[l], t[l + 1], self.basis).first_chaos_coeffs() for l in range(self.n_steps)])


@dataclass(frozen=True)
class CoefficientReport:
    """Lipschitz and growth constants of the coefficients in the grid-proxy norm.

    ``C_eff = L_b + L_sigma M`` with ``M`` the largest noise norm over the
    solver nodes; ``bound = C (1 + M)`` with ``C`` the larger growth constant.
    """

    p: float
    lipschitz_b: float
    lipschitz_sigma: float
    growth_b: float
    growth_sigma: float
    noise_bound: float
    C_eff: float
    C: float
    bound: float
    step_product: float

    @property
    def step_ok(self) -> bool:
        return self.step_product < 0.5


def noise_bound(beta: float, times, basis: BasisSpec, p: float = 2.0) -> float:
    """``max_t ||Xdot^beta_t||`` over ``times`` in the grid-proxy norm."""
    return max(distribution_norm(noise_element(beta, float(t), basis), p) for t in times)


def validate_coefficients(problem: SdeProblem, p: float = 2.0) -> CoefficientReport:
    Lb = problem.b.lipschitz(p)
    Ls = problem.sigma.lipschitz(p)
    Cb = max(distribution_norm(problem.b.c0, p), Lb)
    Cs = max(distribution_norm(problem.sigma.c0, p), Ls)
    M = noise_bound(problem.beta, problem.times, problem.basis, p) if not problem.sigma.is_zero else 0.0
    C_eff = Lb + Ls * M
    C = max(Cb, Cs)
    return CoefficientReport(p, Lb, Ls, Cb, Cs, M, C_eff, C, C * (1.0 + M), problem.h * C_eff)


def brute_force_lipschitz(coef: WickAffineCoefficient, n_pairs: int = 100, seed: int = 0, p: float = 2.0) -> float:
    """``max ||F(Y) - F(Z)|| / ||Y - Z||`` over random dense pairs."""
    space = coef.basis.space
    wts = proxy_weights(space, p)
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((n_pairs, space.size)) / np.sqrt(wts)
    Z = rng.standard_normal((n_pairs, space.size)) / np.sqrt(wts)
    FY, _ = coef(Y)
    FZ, _ = coef(Z)
    return float((_row_norms(FY - FZ, wts) / _row_norms(Y - Z, wts)).max())


def _picard_map(problem: SdeProblem, U: np.ndarray, dx: np.ndarray, u0: np.ndarray):
    space = problem.basis.space
    h = problem.h
    B, lost_b = problem.b(U)
    S, lost_s = problem.sigma(U)
    inc = 0.5 * h * (B[:-1] + B[1:])
    noise, lost_n = wick_first_order(0.5 * (S[:-1] + S[1:]), 0.0, dx, space)
    inc += noise
    out = np.empty_like(U)
    out[0] = u0
    out[1:] = u0 + np.cumsum(inc, axis=0)
    return out, lost_b + lost_s + lost_n


def picard_solve(
    problem: SdeProblem,
    tol: float = 1e-12,
    max_iter: int = 100,
    p: float = 2.0,
    initial_guess: Union[str, np.ndarray, None] = None,
    report: Optional[CoefficientReport] = None,
) -> VolterraSolution:
    """Fixed-point iteration of the discretized integral equation.

    Stops when the sup over nodes of the grid-proxy norm of the update is
    below ``tol``. ``initial_guess`` is ``None``/``"U0"`` (constant ``U0``),
    ``"zero"``, or dense coefficients of shape ``(n_steps + 1, size)``.
    """
    report = report if report is not None else validate_coefficients(problem, p)
    if not report.step_ok:
        raise ValueError(
            f"step too coarse: h * C_eff = {report.step_product:.3g} (h={problem.h:g}, C_eff={report.C_eff:.3g}) must be < 0.5"
        )
    space = problem.basis.space
    wts = proxy_weights(space, p)
    u0 = problem.U0.dense()
    n = problem.n_steps + 1
    if initial_guess is None or (isinstance(initial_guess, str) and initial_guess == "U0"):
        U = np.tile(u0, (n, 1))
    elif isinstance(initial_guess, str) and initial_guess == "zero":
        U = np.zeros((n, space.size))
    elif isinstance(initial_guess, str):
        raise ValueError(f"initial_guess must be 'U0', 'zero' or an array, got {initial_guess!r}")
    else:
        U = np.array(initial_guess, dtype=np.float64)
        if U.shape != (n, space.size):
            raise ValueError(f"initial_guess has shape {U.shape}, expected {(n, space.size)}")
    dx = problem.increments() if not problem.sigma.is_zero else np.zeros((n - 1, space.d))
    norms = []
    for it in range(1, max_iter + 1):
        new, dropped = _picard_map(problem, U, dx, u0)
        upd = float(_row_norms(new - U, wts).max())
        norms.append(upd)
        U = new
        if upd <= tol:
            flag = dropped > 0 or problem.U0.overflow
            return VolterraSolution(problem.basis, problem.times, U, "picard", flag, dropped, it, norms)
    r = np.array(norms)
    ratios = r[1:] / np.where(r[:-1] > 0, r[:-1], np.inf)
    raise DivergenceError(
        f"Picard iteration did not reach tol={tol:g} in {max_iter} iterations; "
        f"last update norms {r[-3:].tolist()}, decay ratios {np.round(ratios[-3:], 4).tolist()}"
    )


@dataclass(frozen=True)
class HolderFit:
    """Least-squares fit ``log ||Xdot_t - Xdot_s||^2 = slope log|t - s| + intercept``."""

    beta: float
    p: float
    deltas: np.ndarray
    sq_norms: np.ndarray
    slope: float
    intercept: float
    residual: float


def noise_difference_norm(beta: float, t: float, s: float, p: float = 2.0, m2: float = 1.0, n_h: int = 256) -> float:
    """Squared Hermite-weighted norm of ``Xdot^beta_t - Xdot^beta_s``."""
    if t == s:
        return 0.0
    return power_kernel_norm(t, beta, p, n_h=n_h, m2=m2, s=s).value


def holder_noise_check(
    beta: float, p: float = 2.0, pairs: Optional[Sequence] = None, m2: float = 1.0, n_h: int = 256
) -> HolderFit:
    """Fit the increment exponent of the noise in the Hermite-weighted norm.

    ``pairs`` are ``(t, s)`` with ``t != s``; the default uses ``s = 0.5`` and
    eight log-spaced gaps in ``[1e-3, 1e-1]``.
    """
    if not p > 1:
        raise ValueError(f"p={p} must exceed 1")
    if pairs is None:
        pairs = [(0.5 + d, 0.5) for d in np.geomspace(1e-3, 1e-1, 8)]
    pairs = [(float(t), float(s)) for t, s in pairs if t != s]
    if len(pairs) < 4:
        raise ValueError(f"need at least 4 pairs with t != s, got {len(pairs)}")
    deltas = np.array([abs(t - s) for t, s in pairs])
    sq = np.array([noise_difference_norm(beta, t, s, p, m2, n_h) for t, s in pairs])
    X = np.log(deltas)
    Y = np.log(sq)
    (slope, icpt), res, *_ = np.polyfit(X, Y, 1, full=True)
    resid = float(np.sqrt(res[0] / len(pairs))) if len(res) else 0.0
    return HolderFit(beta, p, deltas, sq, float(slope), float(icpt), resid)
