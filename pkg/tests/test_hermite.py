import mpmath
import numpy as np
import pytest

from fraclevy.hermite import (
    hermite_coefficients_cells,
    hermite_coefficients_power,
    hermite_functions,
    power_kernel_norm,
    weighted_hermite_sum,
)


class TestHermiteFunctions:
    def test_orthonormal(self):
        x, w = np.polynomial.hermite.hermgauss(120)
        psi = hermite_functions(40, x) * np.exp(0.5 * x * x)
        gram = (psi * w) @ psi.T
        np.testing.assert_allclose(gram, np.eye(40), atol=1e-12)

    @pytest.mark.parametrize("n", [0, 1, 5, 12])
    def test_matches_closed_form(self, n):
        x = np.linspace(-4, 4, 17)
        ref = [float(mpmath.hermite(n, xi) * mpmath.exp(-xi * xi / 2) / mpmath.sqrt(2**n * mpmath.factorial(n) * mpmath.sqrt(mpmath.pi))) for xi in x]
        np.testing.assert_allclose(hermite_functions(n + 1, x)[n], ref, atol=1e-13)

    def test_large_index_stays_bounded(self):
        x = np.linspace(-40, 40, 4001)
        assert np.abs(hermite_functions(512, x)).max() < 1.0


class TestCoefficients:
    def test_cells_of_constant_match_quadrature(self):
        edges = np.linspace(-1.0, 1.0, 5)
        c = hermite_coefficients_cells(np.ones(4), edges, 6)
        ref = [float(mpmath.quad(lambda u: hermite_functions(6, float(u))[n], [-1, 1])) for n in range(6)]
        np.testing.assert_allclose(c, ref, atol=1e-12)

    @pytest.mark.parametrize("beta", [0.1, 0.25, 0.4])
    def test_power_kernel_against_mpmath(self, beta):
        # oracle: w = (t-u)^beta removes the endpoint singularity
        t = 0.5
        got = hermite_coefficients_power(t, beta, 4)
        for n in range(4):
            norm = mpmath.sqrt(2**n * mpmath.factorial(n) * mpmath.sqrt(mpmath.pi))
            g = lambda v: mpmath.hermite(n, t - v) * mpmath.exp(-((t - v) ** 2) / 2)
            near = mpmath.quad(lambda w: g(w ** (1 / beta)) / beta, [0, 1])
            far = mpmath.quad(lambda v: v ** (beta - 1) * g(v), [1, mpmath.inf])
            assert got[n] == pytest.approx(float((near + far) / norm), rel=1e-11, abs=1e-13)


class TestWeightedSum:
    def test_value_and_tail_cover_the_full_sum(self):
        n = np.arange(1, 4001)
        c = n ** -0.75
        full = float(np.sum((n + 1.0) ** -4 * c * c))
        ws = weighted_hermite_sum(c[:256], 2.0)
        assert ws.value < full
        assert ws.value + ws.tail == pytest.approx(full, rel=1e-4)
        assert 0 < ws.relative_tail < 1e-3

    def test_zero_coefficients(self):
        ws = weighted_hermite_sum(np.zeros(64), 2.0)
        assert ws.value == 0 and ws.tail == 0 and ws.relative_tail == 0

    def test_power_norm_of_identical_times_vanishes(self):
        assert power_kernel_norm(0.5, 0.25, 2.0, s=0.5).value == 0.0

    def test_power_norm_scales_with_m2(self):
        a = power_kernel_norm(0.5, 0.25, 2.0, m2=1.0).value
        b = power_kernel_norm(0.5, 0.25, 2.0, m2=3.0).value
        assert b == pytest.approx(3 * a, rel=1e-14)
