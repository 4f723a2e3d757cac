"""Linear Wick-Volterra equations driven by fractional Levy noise.

Solves ``U(t) = a(t) + int_0^t b(t,s) U(s) ds + int_0^t sigma(t,s) U(s) <> Xdot^beta_s ds``
on nodes ``t_m = m T / n``. All backends share one discretization: trapezoid
weights for the drift integral and, for the noise integral,

    int_0^{t_m} g(s) <> Xdot_s ds  ~  sum_{l<m} (g_l + g_{l+1})/2 <> dX_l,

with ``dX_l = X^beta_{t_{l+1}} - X^beta_{t_l}`` exact first-chaos elements.
The discrete kernel ``Q[m, l] = q0[m, l] + sum_k q1[m, l, k] K_{e_k}`` is
therefore constant-plus-first-chaos, and Wick products with it reduce to
index shifts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .chaos import BasisSpec, ChaosElement, TestFunction, noise_element, proxy_weights, wick_first_order
from .stochastic_integral import noise_increment
from . import _kernels

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


def kernel_preset(name: str, **params) -> Kernel:
    """Named kernels on the triangle ``s <= t``.

    ``constant(c)``, ``exponential(c, rate)`` = ``c exp(-rate (t-s))``,
    ``polynomial(coeffs)`` = ``sum_i coeffs[i] (t-s)^i``.
    """
    if name == "constant":
        c = float(params.get("c", 0.0))
        return lambda t, s: np.full(np.broadcast(t, s).shape, c)
    if name == "exponential":
        c, rate = float(params.get("c", 1.0)), float(params.get("rate", 1.0))
        return lambda t, s: c * np.exp(-rate * (np.asarray(t) - np.asarray(s)))
    if name == "polynomial":
        coeffs = [float(x) for x in params.get("coeffs", [0.0])]
        return lambda t, s: np.polyval(coeffs[::-1], np.asarray(t) - np.asarray(s))
    raise ValueError(f"unknown kernel preset {name!r} (constant, exponential, polynomial)")


def zero_kernel(t, s):
    return np.zeros(np.broadcast(t, s).shape)


@dataclass(frozen=True, eq=False)
class VolterraProblem:
    """Coefficients of the Wick-Volterra equation.

    ``a`` is a chaos element, a scalar, or a callable ``t -> ChaosElement | float``;
    ``b`` and ``sigma`` are deterministic kernels ``(t, s) -> float``.
    """

    basis: BasisSpec
    beta: float
    horizon: float
    n_steps: int
    a: Union[ChaosElement, float, Callable] = 1.0
    b: Kernel = zero_kernel
    sigma: Kernel = zero_kernel

    def __post_init__(self):
        if not 0.0 < self.beta < 0.5:
            raise ValueError(f"beta={self.beta} outside (0, 1/2)")
        if self.horizon <= 0 or self.n_steps < 1:
            raise ValueError("need horizon > 0 and n_steps >= 1")
        g = self.basis.grid
        if g.t_min > 0 or g.t_max < self.horizon - 1e-12:
            raise ValueError(f"basis grid [{g.t_min}, {g.t_max}] does not cover [0, {self.horizon}]")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    @property
    def h(self) -> float:
        return self.horizon / self.n_steps

    def forcing(self) -> np.ndarray:
        """Dense coefficients of ``a(t_m)``, shape ``(n_steps + 1, size)``."""
        space = self.basis.space
        out = np.zeros((self.n_steps + 1, space.size))
        for m, t in enumerate(self.times):
            v = self.a(t) if callable(self.a) else self.a
            if isinstance(v, ChaosElement):
                if not v.basis.same_as(self.basis):
                    raise ValueError("forcing element on a different basis")
                out[m, v.ranks] = v.coefs
            else:
                out[m, 0] = float(v)
        return out


@dataclass(frozen=True)
class DiscreteKernel:
    """``Q[m, l] = q0[m, l] + sum_k q1[m, l, k] K_{e_k}`` on the node triangle."""

    basis: BasisSpec
    times: np.ndarray
    q0: np.ndarray
    q1: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.times.size

    def scalar(self, eta: TestFunction) -> np.ndarray:
        """``S(Q)(eta)`` as an ``(n, n)`` matrix."""
        return self.q0 + self.q1 @ eta.coeffs

    def apply(self, data: np.ndarray):
        """``(Q <> A)[m] = sum_l Q[m, l] <> A[l]`` for ``A`` of shape ``(n, ..., size)``."""
        space = self.basis.space
        flat = data.reshape(data.shape[0], -1)
        out = (self.q0 @ flat).reshape(data.shape)
        dropped = 0.0
        succ = space.succ
        for k in range(space.d):
            qk = self.q1[:, :, k]
            if not np.any(qk):
                continue
            v = (qk @ flat).reshape(data.shape)
            col = succ[:, k]
            ok = col >= 0
            out[..., col[ok]] += v[..., ok]
            if not ok.all():
                dropped += float(np.abs(v[..., ~ok]).sum())
        return out, dropped


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    """``w[m, l]`` for ``int_0^{t_m} f ~ sum_l w[m, l] f(t_l)``."""
    w = np.zeros((n + 1, n + 1))
    for m in range(1, n + 1):
        w[m, : m + 1] = h
        w[m, 0] = w[m, m] = h / 2
    return w


def discretize_kernel(p: VolterraProblem) -> DiscreteKernel:
    t = p.times
    n = p.n_steps
    w = trapezoid_weights(n, p.h)
    tt, ss = np.meshgrid(t, t, indexing="ij")
    lower = ss <= tt + 1e-14
    q0 = np.where(lower, w * p.b(tt, ss), 0.0)
    sig = np.where(lower, p.sigma(tt, ss), 0.0)
    d = p.basis.d
    q1 = np.zeros((n + 1, n + 1, d))
    if np.any(sig):
        dx = np.array([noise_increment(p.beta, t[l], t[l + 1], p.basis).first_chaos_coeffs() for l in range(n)])
        for m in range(1, n + 1):
            # node l collects half of dX_{l-1} and half of dX_l inside [0, t_m]
            half = np.zeros((m + 1, d))
            half[1:] += 0.5 * dx[:m]
            half[:m] += 0.5 * dx[:m]
            q1[m, : m + 1] = sig[m, : m + 1, None] * half
    return DiscreteKernel(p.basis, t, q0, q1, w)


@dataclass
class VolterraSolution:
    """Chaos solution on the nodes: ``data[m]`` are dense coefficients of ``U(t_m)``."""

    basis: BasisSpec
    times: np.ndarray
    data: np.ndarray
    backend: str
    overflow: bool = False
    dropped: float = 0.0
    iterations: int = 0
    update_norms: list = field(default_factory=list)
    gauge_ok: bool = True

    @property
    def certified(self) -> bool:
        return not self.overflow

    def element(self, m: int) -> ChaosElement:
        return ChaosElement.from_dense(self.basis, self.data[m], self.overflow, self.dropped)

    def elements(self) -> list:
        return [self.element(m) for m in range(self.times.size)]

    def s_transform(self, eta: TestFunction) -> np.ndarray:
        eta.check_admissible()
        return self.data @ self.basis.space.monomials(eta.coeffs)

    def decay_ratios(self) -> np.ndarray:
        u = np.asarray(self.update_norms)
        with np.errstate(divide="ignore", invalid="ignore"):
            return u[1:] / u[:-1]


@dataclass
class CollocationSolution:
    """Per-probe scalar solutions ``values[i, m] = S U(t_m)(eta_i)``."""

    times: np.ndarray
    values: np.ndarray
    probes: list
    backend: str = "s_collocation"


@dataclass
class MatrixResolvent:
    """Partial sums ``R = sum_{n <= n_terms} Q^n`` of the discretized operator.

    ``data[m, j]`` holds dense coefficients of ``R[m, columns[j]]``; then
    ``U = J + R <> J`` solves the node system exactly (up to truncation).
    """

    kernel: DiscreteKernel
    columns: np.ndarray
    data: np.ndarray
    term_norms: list
    overflow: bool
    dropped: float

    @property
    def n_terms(self) -> int:
        return len(self.term_norms)

    def s_transform(self, eta: TestFunction) -> np.ndarray:
        return self.data @ self.kernel.basis.space.monomials(eta.coeffs)

    def identity_residual(self, eta: TestFunction) -> float:
        """``max |S(R - Q - Q R)|`` over the stored columns at ``eta``."""
        if self.columns.size != self.kernel.n_nodes:
            raise ValueError("the identity needs all columns")
        sq = self.kernel.scalar(eta)
        sr = self.s_transform(eta)
        return float(np.abs(sr - sq - sq @ sr).max())


class DivergenceError(RuntimeError):
    pass


def _row_norms(data: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.sqrt((data**2 * weights).sum(axis=-1))


def _check_divergence(norms, what):
    if len(norms) > 6 and all(norms[-i] >= norms[-i - 1] > 0 for i in range(1, 4)):
        raise DivergenceError(f"{what} terms not decreasing: last norms {norms[-4:]}")


def matrix_resolvent(
    kernel: DiscreteKernel, n_max: int = 20, tol: float = 0.0, columns=None, p: float = 2.0
) -> MatrixResolvent:
    """``sum_{n=1}^{n_max} Q^n`` via ``Q^{n+1} = Q <> Q^n``, optionally for a few columns.

    Stops once the last term's grid-proxy norm is below ``tol``.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    space = kernel.basis.space
    n = kernel.n_nodes
    cols = np.arange(n) if columns is None else np.atleast_1d(np.asarray(columns, dtype=int))
    term = np.zeros((n, cols.size, space.size))
    term[:, :, 0] = kernel.q0[:, cols]
    dropped = 0.0
    if space.order >= 1:
        term[:, :, 1 : space.d + 1] = kernel.q1[:, cols, :]
    else:
        dropped = float(np.abs(kernel.q1).sum())
    total = term.copy()
    wts = proxy_weights(space, p)
    norms = [float(_row_norms(term, wts).max())]
    for _ in range(1, n_max):
        if norms[-1] <= tol:
            break
        term, lost = kernel.apply(term)
        dropped += lost
        total += term
        norms.append(float(_row_norms(term, wts).max()))
        _check_divergence(norms, "resolvent")
    return MatrixResolvent(kernel, cols, total, norms, dropped > 0, dropped)


@dataclass(frozen=True)
class KernelDensity:
    """``K(t_m, s_l) = b(t_m, s_l) + sigma(t_m, s_l) Xdot^beta_{s_l}`` on the node triangle.

    ``k0[m, l]`` is the constant part and ``k1[m, l]`` the first-chaos
    coefficients; both vanish above the diagonal.
    """

    basis: BasisSpec
    times: np.ndarray
    k0: np.ndarray
    k1: np.ndarray

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    def right_apply(self, A: np.ndarray):
        """``(A <> K)[m, l] = sum_j A[m, j] <> K[j, l]`` for dense ``A`` of shape ``(n, n, size)``."""
        space = self.basis.space
        At = np.ascontiguousarray(np.moveaxis(A, 1, 2))  # (m, size, j)
        out = np.moveaxis(At @ self.k0, 2, 1)
        dropped = 0.0
        for k in range(space.d):
            ck = self.k1[:, :, k]
            if not np.any(ck):
                continue
            v = np.moveaxis(At @ ck, 2, 1)
            col = space.succ[:, k]
            ok = col >= 0
            out[..., col[ok]] += v[..., ok]
            dropped += float(np.abs(v[..., ~ok]).sum())
        return out, dropped

    def interval_product(self, A: np.ndarray):
        """``int_{s_l}^{t_m} A(t_m, u) <> K(u, s_l) du`` by the trapezoid rule on the nodes.

        Returns dense coefficients (zero on and above the diagonal) and the
        mass dropped by the order cap.
        """
        n = self.times.size
        h = self.h
        idx = np.arange(n)
        full, lost = self.right_apply(A)
        # j = l endpoint: A[m, l] <> K[l, l]
        at_l, lost_l = wick_first_order(A, self.k0[idx, idx][None, :], self.k1[idx, idx][None, :, :], self.basis.space)
        # j = m endpoint: A[m, m] <> K[m, l]
        diag = A[idx, idx][:, None, :]
        at_m, lost_m = wick_first_order(np.broadcast_to(diag, A.shape), self.k0, self.k1, self.basis.space)
        out = h * full - 0.5 * h * at_l - 0.5 * h * at_m
        out[np.triu_indices(n)] = 0.0
        return out, h * (lost + 0.5 * lost_l + 0.5 * lost_m)

    def dense(self) -> np.ndarray:
        space = self.basis.space
        out = np.zeros(self.k0.shape + (space.size,))
        out[..., 0] = self.k0
        if space.order >= 1:
            out[..., 1 : space.d + 1] = self.k1
        return out

    def scalar(self, eta: TestFunction) -> np.ndarray:
        return self.k0 + self.k1 @ eta.coeffs


def kernel_density(p: VolterraProblem) -> KernelDensity:
    t = p.times
    tt, ss = np.meshgrid(t, t, indexing="ij")
    lower = ss <= tt + 1e-14
    k0 = np.where(lower, p.b(tt, ss), 0.0)
    sig = np.where(lower, p.sigma(tt, ss), 0.0)
    k1 = np.zeros(k0.shape + (p.basis.d,))
    if np.any(sig):

        noise = np.array([noise_element(p.beta, s, p.basis).first_chaos_coeffs() for s in t])
        k1 = sig[..., None] * noise[None, :, :]
    return KernelDensity(p.basis, t, k0, k1)


@dataclass
class ResolventKernel:
    """Partial sum ``H = sum_{n <= n_terms} K_n`` of iterated kernels.

    ``K_{n+1}(t, s) = int_s^t K_n(t, u) <> K(u, s) du`` with the trapezoid
    rule on the nodes of ``[s, t]``. ``data[m, l]`` are dense coefficients of
    ``H(t_m, s_l)``.
    """

    kernel: KernelDensity
    data: np.ndarray
    term_norms: list
    overflow: bool
    dropped: float

    @property
    def n_terms(self) -> int:
        return len(self.term_norms)

    def element(self, m: int, l: int) -> ChaosElement:
        return ChaosElement.from_dense(self.kernel.basis, self.data[m, l], self.overflow, self.dropped)

    def s_transform(self, eta: TestFunction) -> np.ndarray:
        return self.data @ self.kernel.basis.space.monomials(eta.coeffs)

    def identity_residual(self, eta: Optional[TestFunction] = None, p: float = 2.0) -> float:
        """Residual of ``H = K + int H <> K`` under the series quadrature and order cap.

        With ``eta`` the residual is measured through the S-transform,
        otherwise as the largest grid-proxy norm over node pairs.
        """
        prod, _ = self.kernel.interval_product(self.data)
        res = self.data - self.kernel.dense() - prod
        if eta is not None:
            return float(np.abs(res @ self.kernel.basis.space.monomials(eta.coeffs)).max())
        return float(_row_norms(res, proxy_weights(self.kernel.basis.space, p)).max())


def resolvent_kernel(kernel: KernelDensity, n_max: int = 20, tol: float = 0.0, p: float = 2.0) -> ResolventKernel:
    """Resolvent series ``H = sum_{n=1}^{n_max} K_n`` of a kernel density.

    Reports the grid-proxy norm of every term; stops when it drops below
    ``tol`` and raises :class:`DivergenceError` when it fails to decrease over
    three consecutive orders.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    space = kernel.basis.space
    term = kernel.dense()
    total = term.copy()
    wts = proxy_weights(space, p)
    norms = [float(_row_norms(term, wts).max())]
    dropped = 0.0 if space.order >= 1 else float(np.abs(kernel.k1).sum())
    for _ in range(1, n_max):
        if norms[-1] <= tol:
            break
        term, lost = kernel.interval_product(term)
        dropped += lost
        total += term
        norms.append(float(_row_norms(term, wts).max()))
        _check_divergence(norms, "resolvent")
    return ResolventKernel(kernel, total, norms, dropped > 0, dropped)


def kernel_gauge(kernel: DiscreteKernel, p: float = 2.0) -> float:
    """Largest grid-proxy norm of ``Q[m, l] / w[m, l]`` on the triangle."""
    space = kernel.basis.space
    wts = proxy_weights(space, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(kernel.weights > 0, 1.0 / kernel.weights, 0.0)
    c0 = (kernel.q0 * scale) ** 2 * wts[0]
    if space.order >= 1:
        c1 = ((kernel.q1 * scale[..., None]) ** 2 * wts[1 : space.d + 1]).sum(axis=-1)
    else:
        c1 = 0.0
    return float(np.sqrt((c0 + c1).max()))


def solve_volterra(
    problem: VolterraProblem,
    backend: str = "chaos_picard",
    tol: float = 1e-12,
    max_iter: int = 200,
    probes: Optional[Sequence[TestFunction]] = None,
    n_max: int = 60,
    gauge_bound: Optional[float] = None,
    p: float = 2.0,
):
    """Solve the discretized equation with one of three backends.

    ``chaos_picard``: ``U <- J + Q <> U`` until the sup-in-time grid-proxy norm
    of the update is below ``tol``. ``chaos_resolvent``: ``U = J + R <> J``
    with the resolvent series. ``s_collocation``: for each probe ``eta``
    solve the scalar lower-triangular system ``(I - S(Q)) u = S(J)``.

    ``gauge_bound`` bounds the kernel's grid-proxy gauge; when exceeded the
    chaos backends still run but with divergence monitoring only (reported
    through ``update_norms``).
    """
    K = discretize_kernel(problem)
    J = problem.forcing()
    space = problem.basis.space
    if backend == "s_collocation":
        if not probes:
            raise ValueError("s_collocation needs a list of probe test functions")
        n = K.n_nodes
        vals = []
        mono = None
        for eta in probes:
            eta.check_admissible()
            mono = space.monomials(eta.coeffs)
            A = np.eye(n) - K.scalar(eta)
            vals.append(linalg.solve_triangular(A, J @ mono, lower=True))
        return CollocationSolution(K.times, np.array(vals), list(probes))
    gauge_ok = gauge_bound is None or kernel_gauge(K, p) <= gauge_bound
    wts = proxy_weights(space, p)
    if backend == "chaos_picard":
        U = J.copy()
        norms = []
        for it in range(1, max_iter + 1):
            QU, dropped = K.apply(U)
            new = J + QU
            upd = float(_row_norms(new - U, wts).max())
            norms.append(upd)
            U = new
            if upd <= tol:
                return VolterraSolution(problem.basis, K.times, U, backend, dropped > 0, dropped, it, norms, gauge_ok)
            if len(norms) > 6 and all(norms[-i] >= norms[-i - 1] for i in range(1, 4)):
                break
        raise DivergenceError(
            f"Picard iteration did not reach tol={tol:g} in {len(norms)} iterations; "
            f"last update norms {norms[-3:]}, ratios {np.round(np.array(norms[-3:]) / np.array(norms[-4:-1]), 4).tolist()}"
        )
    if backend == "chaos_resolvent":
        R = matrix_resolvent(K, n_max=n_max, tol=tol * 1e-3, p=p)
        U = J.copy()
        dropped = R.dropped
        for l in range(K.n_nodes):
            jl = J[l]
            nz = np.nonzero(jl)[0]
            if nz.size == 0:
                continue
            words = space.words[nz]
            out, lost = _kernels.wick_dense(
                np.ascontiguousarray(R.data[:, l, :]),
                np.ascontiguousarray(jl[nz]),
                np.ascontiguousarray(words),
                space.succ,
                space.sentinel,
            )
            U += out
            dropped += lost
        return VolterraSolution(
            problem.basis, K.times, U, backend, dropped > 0, dropped, R.n_terms, R.term_norms, gauge_ok
        )
    raise ValueError(f"unknown backend {backend!r} (chaos_picard, chaos_resolvent, s_collocation)")
