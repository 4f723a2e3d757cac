import numpy as np
import pytest

from fraclevy.flp_simulate import (
    HistoryPartition,
    covariance_oracle,
    empirical_moments,
    flp_at_edges,
    moving_average,
    plan_history,
    simulate_flp_paths,
    transform_alpha_to_beta,
)
from fraclevy.frac_ops import flp_variance_closed_form, moving_average_weights
from fraclevy.grid import TimeGrid
from fraclevy.levy_models import LevyModel, discretize_measure, sample_increments

# Cov(X_0.5, X_1) at beta = 0.25, m2 = 1, mpmath quadrature of the kernel product
COV_HALF_ONE = 0.53192304053524357


@pytest.fixture(scope="module")
def grid():
    return TimeGrid.from_step(-2.0, 1.0, 1 / 32)


class TestHistory:
    def test_none_raises_with_required_t_min(self, grid):
        with pytest.raises(ValueError, match="t_min <="):
            plan_history(grid, 0.4, budget=0.01, history="none")

    def test_none_allowed_when_small(self):
        g = TimeGrid.from_step(-1e4, 1.0, 1.0)
        part = plan_history(g, 0.1, budget=0.05, history="none")
        assert part.n_far == 0

    def test_auto_meets_tolerance(self, grid):
        for beta in (0.1, 0.25, 0.4):
            part = plan_history(grid, beta, history_tol=1e-4)
            rep_tail = part.horizon
            assert rep_tail > 2.0
            assert np.all(np.diff(part.edges) > 0)

    def test_partition_validation(self, grid):
        with pytest.raises(ValueError):
            HistoryPartition(grid, np.array([-5.0, -3.0]))

    def test_grid_must_reach_negative_times(self):
        with pytest.raises(ValueError):
            plan_history(TimeGrid(0.0, 1.0, 4), 0.2)


class TestMovingAverage:
    def test_convolution_matches_dense_weights(self, grid, two_point):
        part = plan_history(grid, 0.3)
        inc = sample_increments(two_point, part.widths, seed=1, n_paths=3).increments
        fast = moving_average(inc, part, 0.3)
        w = moving_average_weights(part.edges[:, None], 0.3, part.edges[None, :-1], part.edges[None, 1:])
        np.testing.assert_allclose(fast, inc @ w.T, rtol=0, atol=1e-12 * np.abs(fast).max())

    def test_zero_at_origin(self, grid, two_point):
        p = simulate_flp_paths(two_point, 0.25, grid, 5, seed=3)
        np.testing.assert_array_equal(p.at(0.0), 0.0)

    def test_wrong_increment_count(self, grid):
        part = plan_history(grid, 0.3)
        with pytest.raises(ValueError):
            moving_average(np.zeros((1, 3)), part, 0.3)


class TestSimulate:
    def test_seed_determinism_and_blocks(self, grid, two_point):
        a = simulate_flp_paths(two_point, 0.25, grid, 1030, seed=9, times=[0.5, 1.0])
        b = simulate_flp_paths(two_point, 0.25, grid, 1030, seed=9, times=[0.5, 1.0])
        np.testing.assert_array_equal(a.values, b.values)
        a = simulate_flp_paths(two_point, 0.25, grid, 1030, seed=9, times=[0.5, 1.0], keep_increments=True)
        c = simulate_flp_paths(two_point, 0.25, grid, 10, seed=9, times=[0.5, 1.0], keep_increments=True)
        # same draws; the batched matrix product may round differently by an ulp
        np.testing.assert_array_equal(a.increments[:10], c.increments)
        np.testing.assert_allclose(a.values[:10], c.values, rtol=1e-14, atol=1e-15)

    def test_report(self, grid, two_point):
        p = simulate_flp_paths(two_point, 0.25, grid, 2, seed=0)
        assert p.report.relative_tail < 1e-3
        assert p.report.discrete_ratio == pytest.approx(1.0, abs=2e-3)

    @pytest.mark.parametrize("beta", [0.0, 0.5, 0.7])
    def test_rejects_beta(self, grid, two_point, beta):
        with pytest.raises(ValueError, match="outside"):
            simulate_flp_paths(two_point, beta, grid, 2, seed=0)

    def test_times_outside(self, grid, two_point):
        with pytest.raises(ValueError):
            simulate_flp_paths(two_point, 0.25, grid, 2, seed=0, times=[2.0])

    def test_unknown_time(self, grid, two_point):
        p = simulate_flp_paths(two_point, 0.25, grid, 2, seed=0, times=[1.0])
        with pytest.raises(KeyError):
            p.at(0.3)

    def test_infinite_activity_with_measure(self, grid):
        m = LevyModel.tempered_stable(1.0, 2.0, 0.5)
        meas = discretize_measure(m, epsilon=1e-3, n_atoms_per_side=8)
        p = simulate_flp_paths(m, 0.2, grid, 4, seed=0, measure=meas, times=[1.0])
        assert np.all(np.isfinite(p.values))

    @pytest.mark.slow
    @pytest.mark.parametrize("t", [0.25, 1.0])
    def test_variance_within_three_se(self, grid, two_point, t):
        p = simulate_flp_paths(two_point, 0.25, grid, 20_000, seed=21, times=[t])
        row = empirical_moments(p)[0]
        oracle = covariance_oracle(t, t, 0.25, 2.0)
        assert abs(row.variance - oracle) < 3 * row.stderr_variance
        assert abs(row.mean) < 3 * row.stderr_mean


class TestOracles:
    @pytest.mark.parametrize("beta", [0.1, 0.25, 0.4])
    def test_variance_oracle_matches_closed_form(self, beta):
        assert covariance_oracle(1.0, 1.0, beta) == pytest.approx(flp_variance_closed_form(1.0, beta), rel=1e-9)

    def test_covariance(self):
        assert covariance_oracle(0.5, 1.0, 0.25) == pytest.approx(COV_HALF_ONE, rel=1e-9)


class TestTransform:
    def test_alpha_to_beta_pathwise(self, two_point):
        g = TimeGrid.from_step(-1.0, 1.0, 1e-3)
        part = plan_history(g, 0.3)
        inc = sample_increments(two_point, part.widths, seed=2, n_paths=2).increments
        xa = flp_at_edges(inc, part, 0.1)
        via = transform_alpha_to_beta(xa, 0.1, 0.3, part).values
        keep = part.edges >= 0
        direct = moving_average(inc, part, 0.3)[:, keep]
        assert np.abs(via - direct).max() / np.abs(direct).max() < 5e-2

    @pytest.mark.parametrize("alpha,beta", [(0.3, 0.3), (0.3, 0.1), (0.0, 0.2)])
    def test_rejects_order(self, grid, alpha, beta):
        part = plan_history(grid, 0.3)
        with pytest.raises(ValueError):
            transform_alpha_to_beta(np.zeros((1, part.n_cells + 1)), alpha, beta, part)


class TestMoments:
    def test_columns(self, grid, two_point):
        p = simulate_flp_paths(two_point, 0.25, grid, 50, seed=1, times=[0.5, 1.0])
        rows = empirical_moments(p)
        assert [r.t for r in rows] == [0.5, 1.0]
        v = p.at(1.0)
        assert rows[1].variance == pytest.approx(v.var(ddof=1))
        assert rows[1].stderr_mean == pytest.approx(np.sqrt(v.var(ddof=1) / 50))

    def test_needs_two_paths(self, grid, two_point):
        p = simulate_flp_paths(two_point, 0.25, grid, 1, seed=1, times=[1.0])
        with pytest.raises(ValueError):
            empirical_moments(p)
