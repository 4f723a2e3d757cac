import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclevy.levy_models import (
    BLOCK_SIZE,
    POISSON_NORMAL_LIMIT,
    LevyModel,
    discretize_measure,
    sample_increments,
    second_moment,
)

# sqrt(pi): 2 c Gamma(2 - y) / g^(2 - y) at c = g = 1, y = 1/2, evaluated with mpmath
TEMPERED_M2 = 1.772453850905516


class TestSecondMoment:
    def test_two_point(self, two_point):
        assert second_moment(two_point) == pytest.approx(2.0, rel=1e-15)

    def test_gaussian_jumps(self):
        m = LevyModel.gaussian_jumps(rate=3.0, scale=0.5)
        assert second_moment(m) == pytest.approx(0.75, rel=1e-9)

    def test_tempered_stable_matches_oracle(self):
        m = LevyModel.tempered_stable(1.0, 1.0, 0.5)
        assert second_moment(m) == pytest.approx(TEMPERED_M2, rel=1e-9)
        assert m.m2_closed_form == pytest.approx(TEMPERED_M2, rel=1e-14)


class TestValidation:
    def test_rejects_nonzero_mean(self):
        with pytest.raises(ValueError, match="mean-zero"):
            LevyModel.from_atoms([1.0, -1.0], [1.0, 2.0])

    def test_rejects_atom_at_zero(self):
        with pytest.raises(ValueError, match="charge 0"):
            LevyModel.from_atoms([0.0, 1.0, -1.0], [1.0, 1.0, 1.0])

    def test_density_undefined_at_zero(self):
        with pytest.raises(ValueError):
            LevyModel.tempered_stable().nu(0.0)

    def test_empty_measure_is_degenerate(self):
        m = LevyModel.from_atoms([], [])
        assert m.is_degenerate
        with pytest.raises(ValueError, match="degenerate"):
            m.check()


class TestDiscretize:
    def test_atomic_passthrough(self, two_point):
        d = discretize_measure(two_point)
        np.testing.assert_array_equal(d.sizes, two_point.sizes)
        assert d.m2_lost == 0.0

    def test_second_moment_preserved_per_cell(self):
        m = LevyModel.tempered_stable(1.0, 1.0, 0.5)
        d = discretize_measure(m, epsilon=1e-4, n_atoms_per_side=32)
        assert d.m2 + d.m2_lost == pytest.approx(TEMPERED_M2, rel=1e-8)
        assert d.m2_lost < 1e-5

    def test_symmetric_atoms(self):
        d = discretize_measure(LevyModel.gaussian_jumps(), n_atoms_per_side=8)
        np.testing.assert_allclose(np.sort(d.sizes), -np.sort(d.sizes)[::-1])
        assert abs(np.dot(d.sizes, d.masses)) < 1e-12

    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValueError):
            discretize_measure(LevyModel.tempered_stable(), epsilon=0.0)


class TestSampling:
    def test_shape_and_seed(self, two_point):
        a = sample_increments(two_point, np.full(10, 0.1), seed=3, n_paths=5)
        b = sample_increments(two_point, np.full(10, 0.1), seed=3, n_paths=5)
        assert a.increments.shape == (5, 10)
        np.testing.assert_array_equal(a.increments, b.increments)

    def test_path_depends_only_on_index(self, two_point):
        w = np.full(6, 0.2)
        full = sample_increments(two_point, w, seed=11, n_paths=BLOCK_SIZE + 5).increments
        tail = sample_increments(two_point, w, seed=11, n_paths=3, first_path=BLOCK_SIZE + 2).increments
        np.testing.assert_array_equal(full[BLOCK_SIZE + 2 :], tail)

    def test_infinite_activity_needs_measure(self):
        with pytest.raises(ValueError):
            sample_increments(LevyModel.tempered_stable(), np.ones(3), seed=0)

    @pytest.mark.parametrize("width", [0.1, 1e12])
    def test_variance_per_cell(self, two_point, width):
        inc = sample_increments(two_point, np.array([width]), seed=5, n_paths=40_000).increments[:, 0]
        var = 2.0 * width
        # compound-Poisson fourth moment: m4 = 2 w + 3 (2 w)^2
        se = np.sqrt((2 * width + 2 * var**2) / inc.size)
        assert abs(inc.var() - var) < 4 * se
        assert abs(inc.mean()) < 4 * np.sqrt(var / inc.size)

    def test_normal_limit_is_huge(self):
        assert POISSON_NORMAL_LIMIT >= 1e9

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 40))
    def test_increment_sum_is_mean_zero_in_law(self, seed, n):
        # exact arithmetic: two-point increments are integers minus zero drift
        inc = sample_increments(LevyModel.two_point(), np.full(n, 0.5), seed=seed).increments
        np.testing.assert_array_equal(inc, np.round(inc))
