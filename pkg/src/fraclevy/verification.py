"""Property suites: every identity of the calculus as an executable check.

Each suite returns a list of :class:`Check` records. Tolerances come from
:data:`DEFAULT_TOLERANCES` and can be overridden per run.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .chaos import (
    BasisSpec,
    ChaosElement,
    flp_element,
    probe_set,
    random_element,
    s_transform,
    wick_exp,
    wick_product,
)
from .flp_simulate import (
    covariance_oracle,
    empirical_moments,
    flp_at_edges,
    moving_average,
    plan_history,
    simulate_flp_paths,
    transform_alpha_to_beta,
)
from .frac_ops import rl_fractional_integral
from .grid import GridFunction, TimeGrid
from .levy_models import STREAM_MISC, LevyModel, discretize_measure, make_rng, sample_increments, second_moment
from .sde import (
    SdeProblem,
    WickAffineCoefficient,
    brute_force_lipschitz,
    holder_noise_check,
    picard_solve,
    validate_coefficients,
)
from .stochastic_integral import (
    field_weights,
    fractional_transform_integrand,
    skorohod_frac,
    skorohod_pjm,
    skorohod_via_kernel,
)
from .volterra import VolterraProblem, kernel_density, kernel_preset, resolvent_kernel, solve_volterra

SUITES = ("isometry", "operators", "wick", "skorohod", "volterra", "sde", "hoelder")

DEFAULT_TOLERANCES = {
    "isometry_z": 3.0,
    "isometry_seconds": 60.0,
    "semigroup": 1e-2,
    "parts": 1e-6,
    "linearity": 1e-12,
    "fft_vs_direct": 1e-12,
    "wick_homomorphism": 1e-10,
    "wick_exp": 1e-8,
    "skorohod_s_identity": 1e-10,
    "skorohod_kernel_route": 1e-6,
    "wick_commutation": 1e-8,
    "transform": 5e-2,
    "volterra_exp": 1e-4,
    "volterra_backends": 1e-6,
    "resolvent_identity": 1e-6,
    "sde_wick_exp": 1e-6,
    "sde_decay_ratio": 1.0,
    "sde_deterministic": 1e-4,
    "sde_lipschitz": 0.05,
    "sde_uniqueness": 1e-8,
    "sde_volterra": 1e-6,
    "hoelder_factor": 0.9,
    "verify_all_seconds": 600.0,
}


@dataclass
class Check:
    """One measured quantity against its tolerance.

    ``relation`` is ``"<="`` (value must not exceed tolerance) or ``">="``.
    """

    suite: str
    name: str
    value: float
    tolerance: float
    relation: str = "<="
    detail: str = ""

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value <= self.tolerance if self.relation == "<=" else self.value >= self.tolerance

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{flag} {self.suite}/{self.name}: {self.value:.4g} {self.relation} {self.tolerance:.4g}{extra}"

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        d["value"] = float(self.value)
        return d


@dataclass
class Report:
    checks: List[Check]
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> List[str]:
        return [c.line() for c in self.checks]

    def to_json(self) -> str:
        return json.dumps(
            {"passed": self.passed, "seconds": self.seconds, "checks": [c.as_dict() for c in self.checks]}, indent=2
        )


def _tol(tolerances: Optional[Dict], key: str) -> float:
    if tolerances and key in tolerances:
        return float(tolerances[key])
    return DEFAULT_TOLERANCES[key]


def _bump(center: float = 0.5, radius: float = 0.4) -> Callable:
    def f(t):
        t = np.asarray(t, dtype=np.float64)
        z = (t - center) / radius
        out = np.zeros_like(t)
        inside = np.abs(z) < 1
        out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
        return out

    return f


def _separable_basis(n_cells: int, order: int, t_min: float = -1.0, t_max: float = 1.0) -> BasisSpec:
    marks = discretize_measure(LevyModel.two_point())
    return BasisSpec(TimeGrid(t_min, t_max, n_cells), marks, order, "separable")


# isometry --------------------------------------------------------------------


def isometry_checks(
    betas=(0.1, 0.25, 0.4), n_paths: int = 100_000, h: float = 1 / 64, t_min: float = -2.0, seed: int = 12345, tolerances=None
) -> List[Check]:
    """``Var X^beta_1`` from simulated two-point paths against the quadrature oracle."""
    model = LevyModel.two_point()
    m2 = second_moment(model)
    grid = TimeGrid.from_step(t_min, 1.0, h)
    out = []
    for beta in betas:
        t0 = time.perf_counter()
        paths = simulate_flp_paths(model, beta, grid, n_paths, seed, times=[1.0])
        row = empirical_moments(paths)[0]
        oracle = covariance_oracle(1.0, 1.0, beta, m2)
        secs = time.perf_counter() - t0
        z = abs(row.variance - oracle) / row.stderr_variance
        detail = f"var={row.variance:.5f} oracle={oracle:.5f} se={row.stderr_variance:.2e}"
        out.append(Check("isometry", f"variance_z[beta={beta}]", z, _tol(tolerances, "isometry_z"), detail=detail))
        out.append(Check("isometry", f"seconds[beta={beta}]", secs, _tol(tolerances, "isometry_seconds")))
    return out


# operators -------------------------------------------------------------------


def operator_checks(h: float = 1e-3, tolerances=None) -> List[Check]:
    grid = TimeGrid.from_step(-1.0, 1.0, h)
    f = GridFunction.from_callable(grid, _bump())
    g = GridFunction.from_callable(grid, _bump(0.3, 0.3))
    out = []
    for a, b in ((0.1, 0.2), (0.15, 0.3)):
        lhs = rl_fractional_integral(rl_fractional_integral(f, b, "minus"), a, "minus")
        rhs = rl_fractional_integral(f, a + b, "minus")
        err = (lhs - rhs).l2_norm() / rhs.l2_norm()
        out.append(Check("operators", f"semigroup[{a},{b}]", err, _tol(tolerances, "semigroup")))
    for beta in (0.1, 0.25, 0.4):
        lhs = f.inner(rl_fractional_integral(g, beta, "plus"))
        rhs = g.inner(rl_fractional_integral(f, beta, "minus"))
        scale = f.l2_norm() * rl_fractional_integral(g, beta, "plus").l2_norm()
        out.append(Check("operators", f"parts[beta={beta}]", abs(lhs - rhs) / scale, _tol(tolerances, "parts")))
    beta = 0.25
    combo = rl_fractional_integral(f * 2.0 + g * (-3.0), beta)
    sep = rl_fractional_integral(f, beta) * 2.0 + rl_fractional_integral(g, beta) * (-3.0)
    lin = float(np.abs(combo.values - sep.values).max() / np.abs(sep.values).max())
    out.append(Check("operators", "linearity", lin, _tol(tolerances, "linearity")))
    d = rl_fractional_integral(f, beta, method="direct").values
    ff = rl_fractional_integral(f, beta, method="fft").values
    out.append(Check("operators", "fft_vs_direct", float(np.abs(d - ff).max() / np.abs(d).max()), _tol(tolerances, "fft_vs_direct")))
    return out


# wick --------------------------------------------------------------------------


def wick_checks(n_triples: int = 100, seed: int = 7, tolerances=None) -> List[Check]:
    """``S(F <> G) = SF SG`` on random ``|alpha| <= 3`` elements at order cap 6."""
    rng = make_rng(seed, STREAM_MISC)
    basis = _separable_basis(8, 6)
    worst, overflow = 0.0, False
    for _ in range(n_triples):
        F = random_element(basis, rng, 3, nnz=15)
        G = random_element(basis, rng, 3, nnz=15)
        eta = probe_set(basis, 1, seed=int(rng.integers(2**31)))[0]
        FG = wick_product(F, G)
        overflow |= FG.overflow
        ref = s_transform(F, eta) * s_transform(G, eta)
        worst = max(worst, abs(s_transform(FG, eta) - ref))
    out = [Check("wick", "homomorphism", worst, _tol(tolerances, "wick_homomorphism"))]
    out.append(Check("wick", "no_overflow", float(overflow), 0.0))
    X = flp_element(0.25, 1.0, basis.with_order(12)) * 0.5
    E = wick_exp(X)
    err = max(abs(s_transform(E, e) - np.exp(s_transform(X, e))) for e in probe_set(X.basis))
    out.append(Check("wick", "wick_exp", err, _tol(tolerances, "wick_exp")))
    return out


# skorohod ----------------------------------------------------------------------


def skorohod_checks(seed: int = 11, tolerances=None) -> List[Check]:
    rng = make_rng(seed, STREAM_MISC)
    out = []
    marks = discretize_measure(LevyModel.two_point())
    for mode, n_cells in (("atoms", 4), ("separable", 8)):
        basis = BasisSpec(TimeGrid(-1.0, 1.0, n_cells), marks, 4, mode)
        probes = probe_set(basis)
        G = [random_element(basis, rng, 2, nnz=6) for _ in range(basis.d)]
        dG = skorohod_pjm(G, basis)
        w = field_weights(basis)
        err = max(abs(s_transform(dG, e) - sum(s_transform(G[k], e) * e.coeffs[k] * w[k] for k in range(basis.d))) for e in probes)
        out.append(Check("skorohod", f"s_identity[{mode}]", err, _tol(tolerances, "skorohod_s_identity")))
        F = [random_element(basis, rng, 2, nnz=6) for _ in range(n_cells)]
        a = skorohod_frac(F, 0.25, basis)
        b = skorohod_via_kernel(F, 0.25, basis)
        err = max(abs(s_transform(a, e) - s_transform(b, e)) for e in probes)
        out.append(Check("skorohod", f"kernel_route[{mode}]", err, _tol(tolerances, "skorohod_kernel_route")))
        Y = random_element(basis, rng, 1, nnz=4)
        lhs = wick_product(Y, a)
        rhs = skorohod_frac([wick_product(Y, f) for f in F], 0.25, basis)
        err = max(abs(s_transform(lhs, e) - s_transform(rhs, e)) for e in probes)
        out.append(Check("skorohod", f"wick_commutation[{mode}]", err, _tol(tolerances, "wick_commutation")))
    out.extend(transform_checks(seed=seed, tolerances=tolerances))
    return out


def transform_checks(alpha: float = 0.1, beta: float = 0.3, h: float = 1e-3, n_paths: int = 4, seed: int = 11, tolerances=None):
    """``alpha`` route vs ``beta`` route: pathwise and through the S-transform."""
    tol = _tol(tolerances, "transform")
    grid = TimeGrid.from_step(-1.0, 1.0, h)
    part = plan_history(grid, beta)
    inc = sample_increments(LevyModel.two_point(), part.widths, seed, n_paths).increments
    xa = flp_at_edges(inc, part, alpha)
    via = transform_alpha_to_beta(xa, alpha, beta, part).values
    keep = part.edges >= -1e-12 * h
    direct = moving_average(inc, part, beta)[:, keep]
    path_err = float(np.abs(via - direct).max() / np.abs(direct).max())
    out = [Check("skorohod", "transform_pathwise", path_err, tol)]
    basis = _separable_basis(grid.n_cells, 1)
    g = GridFunction.from_callable(grid, _bump())
    F = [ChaosElement.constant(basis, v) for v in g.values]
    lhs = skorohod_frac(F, beta, basis)
    rhs = skorohod_frac(fractional_transform_integrand(F, alpha, beta), alpha, basis)
    sl = np.array([s_transform(lhs, e) for e in probe_set(basis)])
    sr = np.array([s_transform(rhs, e) for e in probe_set(basis)])
    out.append(Check("skorohod", "transform_s", float(np.abs(sl - sr).max() / np.abs(sl).max()), tol))
    return out


# volterra ----------------------------------------------------------------------


def random_volterra_problem(rng: np.random.Generator, basis: BasisSpec, n_steps: int = 24) -> VolterraProblem:
    a = ChaosElement.constant(basis, 1.0) + random_element(basis, rng, 1, nnz=3, scale=0.2)
    b = kernel_preset("exponential", c=float(rng.uniform(-1, 1)), rate=float(rng.uniform(0, 1)))
    sigma = kernel_preset("polynomial", coeffs=[float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.3, 0.3))])
    return VolterraProblem(basis, float(rng.uniform(0.1, 0.4)), 1.0, n_steps, a=a, b=b, sigma=sigma)


def volterra_checks(n_problems: int = 3, seed: int = 5, tolerances=None) -> List[Check]:
    out = []
    scalar = _separable_basis(4, 0)
    p = VolterraProblem(scalar, 0.25, 1.0, 1000, a=1.0, b=kernel_preset("constant", c=1.0))
    u = solve_volterra(p, "chaos_picard")
    out.append(Check("volterra", "constant_kernel_exp", abs(u.data[-1, 0] - np.e), _tol(tolerances, "volterra_exp")))
    H = resolvent_kernel(kernel_density(p), n_max=30, tol=1e-15)
    out.append(Check("volterra", "resolvent_density_exp", abs(H.data[-1, 0, 0] - np.e), _tol(tolerances, "volterra_exp")))
    rng = make_rng(seed, STREAM_MISC)
    basis = _separable_basis(6, 6)
    probes = probe_set(basis)
    worst = {"chaos_picard": 0.0, "chaos_resolvent": 0.0}
    for _ in range(n_problems):
        prob = random_volterra_problem(rng, basis)
        ref = solve_volterra(prob, "s_collocation", probes=probes).values
        for backend in worst:
            sol = solve_volterra(prob, backend)
            err = max(np.abs(sol.s_transform(e) - ref[i]).max() for i, e in enumerate(probes))
            worst[backend] = max(worst[backend], err)
    for backend, err in worst.items():
        out.append(Check("volterra", f"collocation_vs_{backend}", err, _tol(tolerances, "volterra_backends")))
    small = random_volterra_problem(rng, _separable_basis(6, 4), n_steps=16)
    H = resolvent_kernel(kernel_density(small), n_max=40, tol=1e-14)
    res = max(H.identity_residual(e) for e in probe_set(small.basis))
    out.append(Check("volterra", "resolvent_identity", res, _tol(tolerances, "resolvent_identity")))
    return out


# sde -----------------------------------------------------------------------------


def sde_checks(seed: int = 3, tolerances=None) -> List[Check]:
    out = []
    basis = _separable_basis(6, 6)
    one = ChaosElement.constant(basis, 1.0)
    zero = WickAffineCoefficient.make(basis)
    c, beta = 0.5, 0.25
    p = SdeProblem(one, zero, WickAffineCoefficient.make(basis, 0.0, c), beta, 1.0, 1000)
    sol = picard_solve(p)
    X = flp_element(beta, 1.0, basis)
    probes = probe_set(basis)
    err = max(abs(sol.s_transform(e)[-1] - np.exp(c * s_transform(X, e))) for e in probes)
    out.append(Check("sde", "wick_exponential", err, _tol(tolerances, "sde_wick_exp")))
    ratios = sol.decay_ratios()[2:]
    ratios = ratios[np.isfinite(ratios)]
    out.append(Check("sde", "decay_ratio_after_3", float(ratios.max()) if ratios.size else 0.0, _tol(tolerances, "sde_decay_ratio") - 1e-12))
    alt = picard_solve(p, initial_guess="zero")
    err = max(np.abs(alt.s_transform(e) - sol.s_transform(e)).max() for e in probes)
    out.append(Check("sde", "uniqueness", err, _tol(tolerances, "sde_uniqueness")))
    b1 = 0.8
    det = picard_solve(SdeProblem(one, WickAffineCoefficient.make(basis, 0.0, b1), zero, beta, 1.0, 1000))
    out.append(Check("sde", "deterministic_exp", abs(det.data[-1, 0] - np.exp(b1)), _tol(tolerances, "sde_deterministic")))
    b4 = basis.with_order(4)
    one4 = ChaosElement.constant(b4, 1.0)
    sp = SdeProblem(one4, WickAffineCoefficient.make(b4, 0.0, 0.3), WickAffineCoefficient.make(b4, 0.0, 0.5), beta, 1.0, 40)
    vp = VolterraProblem(b4, beta, 1.0, 40, a=1.0, b=kernel_preset("constant", c=0.3), sigma=kernel_preset("constant", c=0.5))
    pr4 = probe_set(b4)
    s1, s2 = picard_solve(sp), solve_volterra(vp)
    err = max(np.abs(s1.s_transform(e) - s2.s_transform(e)).max() for e in pr4)
    out.append(Check("sde", "volterra_consistency", err, _tol(tolerances, "sde_volterra")))
    rng = make_rng(seed, STREAM_MISC)
    c1 = ChaosElement.constant(b4, 1.3) + random_element(b4, rng, 2, nnz=10, scale=0.01)
    coef = WickAffineCoefficient.make(b4, 0.2, c1)
    L = coef.lipschitz()
    brute = brute_force_lipschitz(coef, seed=seed)
    out.append(Check("sde", "lipschitz_vs_sampling", abs(L - brute) / L, _tol(tolerances, "sde_lipschitz")))
    rep = validate_coefficients(sp)
    out.append(Check("sde", "step_guard", rep.step_product, 0.5, detail=f"C_eff={rep.C_eff:.4g}"))
    return out


# hoelder -------------------------------------------------------------------------


def hoelder_checks(betas=(0.1, 0.25, 0.4), p: float = 2.0, tolerances=None) -> List[Check]:
    factor = _tol(tolerances, "hoelder_factor")
    fits = [holder_noise_check(b, p) for b in betas]
    out = [
        Check("hoelder", f"slope[beta={f.beta}]", f.slope, 2 * f.beta * factor, ">=", detail=f"residual={f.residual:.2e}")
        for f in fits
    ]
    s = np.diff([f.slope for f in fits])
    mono = bool(np.all(s > 0) or np.all(s < 0))
    direction = "increasing" if np.all(s > 0) else "decreasing" if np.all(s < 0) else "mixed"
    out.append(Check("hoelder", "slope_monotone_in_beta", float(mono), 1.0, ">=", detail=direction))
    return out


SUITE_FUNCTIONS = {
    "isometry": isometry_checks,
    "operators": operator_checks,
    "wick": wick_checks,
    "skorohod": skorohod_checks,
    "volterra": volterra_checks,
    "sde": sde_checks,
    "hoelder": hoelder_checks,
}


def run_suite(name: str, tolerances: Optional[Dict] = None, seed: Optional[int] = None, log=None) -> Report:
    """Run one suite or ``"all"``; ``log`` receives each check line as it completes."""
    if name != "all" and name not in SUITE_FUNCTIONS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
    names = SUITES if name == "all" else (name,)
    t0 = time.perf_counter()
    checks: List[Check] = []
    for n in names:
        kwargs = {"tolerances": tolerances}
        if seed is not None and n in ("isometry", "wick", "skorohod", "volterra", "sde"):
            kwargs["seed"] = seed
        for c in SUITE_FUNCTIONS[n](**kwargs):
            checks.append(c)
            if log is not None:
                log(c.line())
    secs = time.perf_counter() - t0
    if name == "all":
        c = Check("all", "seconds", secs, _tol(tolerances, "verify_all_seconds"))
        checks.append(c)
        if log is not None:
            log(c.line())
    return Report(checks, secs)
