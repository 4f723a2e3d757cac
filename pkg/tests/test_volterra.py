import numpy as np
import pytest

from fraclevy.chaos import BasisSpec, ChaosElement, flp_element, probe_set, random_element, s_transform
from fraclevy.grid import TimeGrid
from fraclevy.verification import random_volterra_problem
from fraclevy.volterra import (
    DivergenceError,
    VolterraProblem,
    discretize_kernel,
    kernel_density,
    kernel_gauge,
    kernel_preset,
    matrix_resolvent,
    resolvent_kernel,
    solve_volterra,
    trapezoid_weights,
)


@pytest.fixture(scope="module")
def basis6(marks):
    return BasisSpec(TimeGrid(-1.0, 1.0, 6), marks, 6, "separable")


@pytest.fixture(scope="module")
def scalar_basis(marks):
    return BasisSpec(TimeGrid(-1.0, 1.0, 4), marks, 0, "separable")


class TestPresets:
    def test_values(self):
        t, s = np.array([1.0, 2.0]), np.array([0.5, 0.0])
        np.testing.assert_allclose(kernel_preset("constant", c=2.0)(t, s), [2.0, 2.0])
        np.testing.assert_allclose(kernel_preset("exponential", c=3.0, rate=2.0)(t, s), 3 * np.exp(-2 * (t - s)))
        np.testing.assert_allclose(kernel_preset("polynomial", coeffs=[1.0, 0.0, 2.0])(t, s), 1 + 2 * (t - s) ** 2)

    def test_unknown(self):
        with pytest.raises(ValueError, match="unknown kernel preset"):
            kernel_preset("gaussian")


class TestProblem:
    def test_validation(self, sep_basis):
        with pytest.raises(ValueError, match="beta"):
            VolterraProblem(sep_basis, 0.5, 1.0, 10)
        with pytest.raises(ValueError, match="cover"):
            VolterraProblem(sep_basis, 0.25, 2.0, 10)
        with pytest.raises(ValueError):
            VolterraProblem(sep_basis, 0.25, 1.0, 0)

    def test_forcing_accepts_elements_and_callables(self, sep_basis, rng):
        F = random_element(sep_basis, rng)
        p = VolterraProblem(sep_basis, 0.25, 1.0, 4, a=lambda t: F * t)
        J = p.forcing()
        np.testing.assert_allclose(J[-1], F.dense())
        np.testing.assert_allclose(J[0], 0.0)

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_trapezoid_weights_integrate_linears(self, n):
        w = trapezoid_weights(n, 0.1)
        t = 0.1 * np.arange(n + 1)
        np.testing.assert_allclose(w @ t, 0.5 * t**2, atol=1e-15)


class TestDeterministic:
    def test_constant_kernel_gives_exponential(self, scalar_basis):
        p = VolterraProblem(scalar_basis, 0.25, 1.0, 400, a=1.0, b=kernel_preset("constant", c=1.0))
        u = solve_volterra(p)
        np.testing.assert_allclose(u.data[:, 0], np.exp(p.times), rtol=1e-4)
        assert u.certified

    def test_resolvent_density_gives_exponential(self, scalar_basis):
        p = VolterraProblem(scalar_basis, 0.25, 1.0, 200, a=1.0, b=kernel_preset("constant", c=1.0))
        H = resolvent_kernel(kernel_density(p), n_max=30, tol=1e-15)
        t = p.times
        np.testing.assert_allclose(H.data[:, 0, 0], np.exp(t), rtol=1e-4)

    def test_divergence_is_reported(self, scalar_basis):
        p = VolterraProblem(scalar_basis, 0.25, 1.0, 10, a=1.0, b=kernel_preset("constant", c=100.0))
        with pytest.raises(DivergenceError, match="ratios"):
            solve_volterra(p)


class TestNoiseDriven:
    def test_constant_sigma_is_wick_exponential(self, sep_basis):
        c, beta = 0.5, 0.25
        p = VolterraProblem(sep_basis, beta, 1.0, 40, a=1.0, sigma=kernel_preset("constant", c=c))
        u = solve_volterra(p)
        X = flp_element(beta, 1.0, sep_basis)
        for eta in probe_set(sep_basis):
            assert u.s_transform(eta)[-1] == pytest.approx(np.exp(c * s_transform(X, eta)), abs=1e-4)

    def test_backends_agree(self, basis6):
        rng = np.random.default_rng(5)
        probes = probe_set(basis6)
        prob = random_volterra_problem(rng, basis6)
        ref = solve_volterra(prob, "s_collocation", probes=probes).values
        for backend in ("chaos_picard", "chaos_resolvent"):
            sol = solve_volterra(prob, backend)
            for i, eta in enumerate(probes):
                np.testing.assert_allclose(sol.s_transform(eta), ref[i], atol=1e-6)

    def test_matrix_resolvent_identity(self, sep_basis):
        rng = np.random.default_rng(2)
        prob = random_volterra_problem(rng, sep_basis, n_steps=10)
        R = matrix_resolvent(discretize_kernel(prob), n_max=30, tol=1e-15)
        for eta in probe_set(sep_basis, 3):
            assert R.identity_residual(eta) < 1e-6

    def test_resolvent_kernel_identity(self, sep_basis):
        rng = np.random.default_rng(3)
        prob = random_volterra_problem(rng, sep_basis, n_steps=12)
        H = resolvent_kernel(kernel_density(prob), n_max=40, tol=1e-14)
        assert H.identity_residual() < 1e-12
        for eta in probe_set(sep_basis, 3):
            assert H.identity_residual(eta) < 1e-6

    def test_collocation_needs_probes(self, sep_basis):
        p = VolterraProblem(sep_basis, 0.25, 1.0, 4)
        with pytest.raises(ValueError, match="probe"):
            solve_volterra(p, "s_collocation")
        with pytest.raises(ValueError, match="unknown backend"):
            solve_volterra(p, "newton")

    def test_gauge(self, sep_basis):
        p = VolterraProblem(sep_basis, 0.25, 1.0, 10, a=1.0, b=kernel_preset("constant", c=0.5))
        K = discretize_kernel(p)
        assert kernel_gauge(K) == pytest.approx(0.5)
        assert not solve_volterra(p, gauge_bound=0.1).gauge_ok
        assert solve_volterra(p, gauge_bound=1.0).gauge_ok

    def test_forcing_on_other_basis(self, sep_basis, atom_basis):
        p = VolterraProblem(sep_basis, 0.25, 1.0, 4, a=ChaosElement.constant(atom_basis, 1.0))
        with pytest.raises(ValueError, match="different basis"):
            p.forcing()
