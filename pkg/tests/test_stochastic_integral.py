import numpy as np
import pytest

from fraclevy.chaos import ChaosElement, flp_element, probe_set, random_element, s_transform, wick_product
from fraclevy.flp_simulate import moving_average, plan_history
from fraclevy.frac_ops import rl_fractional_integral
from fraclevy.grid import GridFunction, TimeGrid, indicator
from fraclevy.levy_models import LevyModel, sample_increments
from fraclevy.stochastic_integral import (
    field_weights,
    fractional_transform_integrand,
    noise_increment,
    skorohod_frac,
    skorohod_pjm,
    skorohod_via_kernel,
    wiener_integral_element,
    wiener_integral_pathwise,
)


def _family(basis, rng, n):
    return [random_element(basis, rng, 2, nnz=6) for _ in range(n)]


class TestJumpMeasureIntegral:
    def test_s_identity(self, basis, probes, rng):
        G = _family(basis, rng, basis.d)
        dG = skorohod_pjm(G)
        w = field_weights(basis)
        for eta in probes:
            ref = sum(s_transform(G[k], eta) * eta.coeffs[k] * w[k] for k in range(basis.d))
            assert s_transform(dG, eta) == pytest.approx(ref, abs=1e-10)

    def test_linear(self, basis, rng):
        G = _family(basis, rng, basis.d)
        H = _family(basis, rng, basis.d)
        lhs = skorohod_pjm([2 * g - h for g, h in zip(G, H)])
        assert lhs.allclose(2 * skorohod_pjm(G) - skorohod_pjm(H), atol=1e-12)

    def test_zero_integrand(self, basis):
        out = skorohod_pjm([ChaosElement.zero(basis)] * basis.d, basis)
        assert out.nnz == 0 and not out.overflow

    def test_wrong_family_length(self, basis):
        with pytest.raises(ValueError, match="needs"):
            skorohod_pjm([ChaosElement.zero(basis)] * (basis.d - 1), basis)

    def test_top_order_integrand_overflows(self, sep_basis):
        x = ChaosElement.first_chaos(sep_basis, np.ones(sep_basis.d))
        top = wick_product(wick_product(x, x), wick_product(x, x))
        out = skorohod_pjm([top] + [ChaosElement.zero(sep_basis)] * (sep_basis.d - 1))
        assert out.overflow and out.dropped > 0


class TestFractionalIntegral:
    @pytest.mark.parametrize("beta", [0.1, 0.25, 0.4])
    def test_kernel_route(self, basis, probes, rng, beta):
        F = _family(basis, rng, basis.grid.n_cells)
        a = skorohod_frac(F, beta, basis)
        b = skorohod_via_kernel(F, beta, basis)
        for eta in probes:
            assert s_transform(a, eta) == pytest.approx(s_transform(b, eta), abs=1e-6)

    def test_wick_commutation(self, basis, probes, rng):
        F = _family(basis, rng, basis.grid.n_cells)
        Y = random_element(basis, rng, 1, nnz=4)
        lhs = wick_product(Y, skorohod_frac(F, 0.25, basis))
        rhs = skorohod_frac([wick_product(Y, f) for f in F], 0.25, basis)
        for eta in probes:
            assert s_transform(lhs, eta) == pytest.approx(s_transform(rhs, eta), abs=1e-10)

    def test_constant_integrand_gives_noise_increment(self, sep_basis):
        grid = sep_basis.grid
        F = [ChaosElement.constant(sep_basis, 1.0 if e >= 0 else 0.0) for e in grid.edges[:-1]]
        out = skorohod_frac(F, 0.3, sep_basis)
        ref = flp_element(0.3, grid.t_max, sep_basis) - flp_element(0.3, 0.0, sep_basis)
        assert out.allclose(ref, atol=1e-12)
        assert out.allclose(noise_increment(0.3, 0.0, grid.t_max, sep_basis), atol=1e-14)

    def test_mask_restricts(self, sep_basis, rng):
        F = _family(sep_basis, rng, sep_basis.grid.n_cells)
        mask = np.arange(sep_basis.grid.n_cells) % 2 == 0
        whole = skorohod_frac(F, 0.25, sep_basis)
        parts = skorohod_frac(F, 0.25, sep_basis, mask=mask) + skorohod_frac(F, 0.25, sep_basis, mask=~mask)
        assert whole.allclose(parts, atol=1e-12)

    def test_midpoint_rule_is_close(self, sep_basis, rng):
        F = [ChaosElement.constant(sep_basis, 1.0)] * sep_basis.grid.n_cells
        a = skorohod_frac(F, 0.25, sep_basis, rule="midpoint")
        b = skorohod_frac(F, 0.25, sep_basis)
        assert np.abs(a.dense() - b.dense()).max() < 0.2 * np.abs(b.dense()).max()
        with pytest.raises(ValueError, match="rule"):
            skorohod_frac(F, 0.25, sep_basis, rule="simpson")

    def test_rejects_beta(self, sep_basis):
        F = [ChaosElement.zero(sep_basis)] * sep_basis.grid.n_cells
        with pytest.raises(ValueError):
            skorohod_frac(F, 0.5, sep_basis)


class TestParameterTransform:
    def test_alpha_must_be_below_beta(self, sep_basis):
        F = [ChaosElement.constant(sep_basis, 1.0)] * sep_basis.grid.n_cells
        with pytest.raises(ValueError, match="alpha < beta"):
            fractional_transform_integrand(F, 0.3, 0.1)
        with pytest.raises(ValueError):
            fractional_transform_integrand(F, 0.2, 0.2)

    def test_routes_agree_on_fine_grid(self, marks):
        from fraclevy.chaos import BasisSpec

        grid = TimeGrid.from_step(-1.0, 1.0, 1e-3)
        basis = BasisSpec(grid, marks, 1, "separable")
        g = GridFunction.from_callable(grid, lambda t: np.exp(-8 * (t - 0.5) ** 2) * (np.abs(t - 0.5) < 0.4))
        F = [ChaosElement.constant(basis, v) for v in g.values]
        lhs = skorohod_frac(F, 0.3, basis)
        rhs = skorohod_frac(fractional_transform_integrand(F, 0.1, 0.3), 0.1, basis)
        sl = np.array([s_transform(lhs, e) for e in probe_set(basis)])
        sr = np.array([s_transform(rhs, e) for e in probe_set(basis)])
        assert np.abs(sl - sr).max() / np.abs(sl).max() < 5e-2


class TestWienerIntegral:
    @pytest.mark.parametrize("beta", [0.1, 0.25, 0.4])
    def test_indicator_reproduces_path_value(self, beta):
        grid = TimeGrid.from_step(-1.0, 1.0, 1 / 128)
        part = plan_history(grid, beta, budget=10.0, history="none")
        inc = sample_increments(LevyModel.two_point(), grid, 3, 50)
        x = moving_average(inc.increments, part, beta, times=[0.5])[:, 0]
        w = wiener_integral_pathwise(indicator(grid, 0.5), beta, inc)
        np.testing.assert_allclose(w, x, rtol=1e-12, atol=1e-12)

    def test_element_variance_is_isometry(self, marks):
        from fraclevy.chaos import BasisSpec

        grid = TimeGrid.from_step(-1.0, 1.0, 1 / 64)
        basis = BasisSpec(grid, marks, 1, "separable")
        g = GridFunction.from_callable(grid, lambda t: np.cos(3 * t))
        W = wiener_integral_element(g, 0.25, basis)
        k = rl_fractional_integral(g, 0.25, "minus")
        assert W.variance == pytest.approx(basis.m2 * k.l2_norm() ** 2, rel=1e-13)

    def test_grid_mismatch(self):
        grid = TimeGrid.from_step(-1.0, 1.0, 1 / 64)
        inc = sample_increments(LevyModel.two_point(), TimeGrid.from_step(-1.0, 1.0, 1 / 32), 3, 2)
        with pytest.raises(ValueError):
            wiener_integral_pathwise(indicator(grid, 0.5), 0.25, inc)
