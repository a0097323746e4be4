"""Simulation streams, compensator estimators, and residual diagnostics."""

import numpy as np
import pytest

from doobkit import (
    CompensatorEstimate,
    CondExpEstimator,
    DimensionError,
    ModelError,
    ModelSpec,
    PathBatch,
    TimeGrid,
    ValidationError,
    dyadic_grid,
    estimate_compensator,
    residual_martingale_test,
    simulate,
    split_batch,
)
from doobkit.mc import CHUNK_PATHS, _poisson_base_draws, _PoissonDriver, resolve_driver

POISSON = ModelSpec("mc-poisson", {"rate": 2.0})
GAUSS = ModelSpec("mc-gaussian-walk-squared")
GRID = dyadic_grid(3)


class _PlainWalkDriver:
    """Gaussian walk (not squared): a genuine martingale with zero drift."""

    model_id = "custom-walk"

    def simulate_chunk(self, rng, grid, rows, seed, path_offset):
        z = rng.standard_normal(rows * grid.n_steps).reshape(rows, grid.n_steps)
        out = np.zeros((rows, grid.n_times))
        out[:, 1:] = np.cumsum(z * np.sqrt(grid.steps()), axis=1)
        return out

    def increment_mean(self, k, grid, states):
        return np.zeros_like(states)


class _ConstantDriver:
    """Every path is the same deterministic ramp; degenerate cross-sections."""

    def simulate_chunk(self, rng, grid, rows, seed, path_offset):
        return np.repeat(grid.times[None, :], rows, axis=0)


class TestStreamPurity:
    @pytest.mark.parametrize("model", [POISSON, GAUSS], ids=["poisson", "gauss"])
    def test_paths_do_not_depend_on_batch_size(self, model):
        big = simulate(model, GRID, 130, 5)
        small = simulate(model, GRID, 40, 5)
        assert np.array_equal(big.paths[:40], small.paths)

    def test_prefix_stable_across_chunk_boundaries(self):
        around = [CHUNK_PATHS - 1, CHUNK_PATHS, CHUNK_PATHS + 1]
        grid = dyadic_grid(2)
        batches = [simulate(GAUSS, grid, n, 3) for n in around]
        smallest = batches[0]
        for b in batches[1:]:
            assert np.array_equal(b.paths[: smallest.n_paths], smallest.paths)

    def test_rerun_is_bit_identical(self):
        a = simulate(POISSON, GRID, 500, 11)
        b = simulate(POISSON, GRID, 500, 11)
        assert np.array_equal(a.paths, b.paths)

    def test_seed_matters(self):
        a = simulate(GAUSS, GRID, 64, 0)
        b = simulate(GAUSS, GRID, 64, 1)
        assert not np.array_equal(a.paths, b.paths)

    def test_seed_validation(self):
        for bad in (-1, 2.5, "7", True, None):
            with pytest.raises(ValidationError):
                simulate(GAUSS, GRID, 8, bad)
        with pytest.raises(ValidationError):
            simulate(GAUSS, GRID, -1, 1)

    def test_zero_paths_gives_empty_batch(self):
        batch = simulate(GAUSS, GRID, 0, 1)
        assert batch.paths.shape == (0, GRID.n_times)
        assert batch.n_paths == 0


class TestGaussianStream:
    def test_layout_contract(self):
        # chunk 0 draws one flat standard-normal block, reshaped row-major
        n, seed = 37, 13
        batch = simulate(GAUSS, GRID, n, seed)
        rng = np.random.default_rng((seed, 0))
        z = rng.standard_normal(n * GRID.n_steps).reshape(n, GRID.n_steps)
        walk = np.cumsum(z * np.sqrt(GRID.steps()), axis=1)
        assert np.array_equal(batch.paths[:, 1:], walk * walk)
        assert np.all(batch.paths[:, 0] == 0.0)

    def test_terminal_moment(self):
        batch = simulate(GAUSS, dyadic_grid(0), 40000, 17)
        # terminal value is chi-squared_1: mean 1, var 2
        assert batch.paths[:, 1].mean() == pytest.approx(1.0, abs=4.0 * np.sqrt(2.0 / 40000))


class TestPoissonStream:
    def test_recount_oracle(self):
        # regenerate chunk 0's gap draws and recount arrivals directly
        n, seed, rate = 25, 7, 2.0
        batch = simulate(POISSON, GRID, n, seed)
        rng = np.random.default_rng((seed, 0))
        draws = _poisson_base_draws(rate)
        gaps = rng.exponential(1.0 / rate, size=n * draws).reshape(n, draws)
        arrivals = np.cumsum(gaps, axis=1)
        assert np.all(arrivals[:, -1] > 1.0)  # top-up never needed here
        want = (arrivals[:, None, :] <= GRID.times[None, :, None]).sum(axis=2)
        assert np.array_equal(batch.paths, want.astype(float))

    def test_counting_path_shape(self):
        batch = simulate(POISSON, GRID, 400, 23)
        inc = np.diff(batch.paths, axis=1)
        assert np.all(batch.paths[:, 0] == 0.0)
        assert np.all(inc >= 0.0)
        assert np.array_equal(batch.paths, np.round(batch.paths))

    def test_terminal_marginals(self):
        batch = simulate(ModelSpec("mc-poisson", {"rate": 3.0}), dyadic_grid(2), 30000, 29)
        term = batch.paths[:, -1]
        se = np.sqrt(3.0 / 30000)
        assert term.mean() == pytest.approx(3.0, abs=4.0 * se)
        assert term.var() == pytest.approx(3.0, rel=0.1)

    def test_top_up_extends_short_rows(self):
        driver = _PoissonDriver(2.0)
        times = GRID.times
        base = np.array([0.2, 0.5])  # both arrivals inside the horizon
        row1 = driver._full_row(base, times, seed=3, path_index=10)
        row2 = driver._full_row(base, times, seed=3, path_index=10)
        assert np.array_equal(row1, row2)  # per-path stream is deterministic
        assert row1[0] == 0.0 and row1[-1] >= 2.0
        assert np.all(np.diff(row1) >= 0.0)
        other = driver._full_row(base, times, seed=3, path_index=11)
        assert row1.shape == other.shape


class TestBatchPlumbing:
    def test_batch_validation(self):
        with pytest.raises(DimensionError):
            PathBatch(model=GAUSS, grid=GRID, paths=np.zeros((4, 3)), seed=0)

    def test_model_id(self):
        assert simulate(POISSON, GRID, 4, 0).model_id == "mc-poisson(rate=2.0)"
        assert simulate(_PlainWalkDriver(), GRID, 4, 0).model_id == "custom-walk"
        assert simulate(_ConstantDriver(), GRID, 4, 0).model_id == "_ConstantDriver"

    def test_resolve_driver_rejects_finite_kinds(self):
        with pytest.raises(ModelError):
            resolve_driver(ModelSpec("binary-tree", {"steps": 3}))
        with pytest.raises(ModelError):
            resolve_driver(object())

    def test_split(self):
        batch = simulate(GAUSS, GRID, 101, 2)
        fit, test = split_batch(batch)
        assert fit.n_paths == 50 and test.n_paths == 51
        assert np.array_equal(np.vstack([fit.paths, test.paths]), batch.paths)
        assert fit.label == "full/fit" and test.label == "full/test"
        with pytest.raises(ValidationError):
            split_batch(simulate(GAUSS, GRID, 1, 0))

    def test_tofile_round_trip(self, tmp_path):
        batch = simulate(POISSON, GRID, 12, 4)
        target = tmp_path / "paths.f64"
        batch.tofile(target)
        back = np.fromfile(target, dtype="<f8").reshape(batch.paths.shape)
        assert np.array_equal(back, batch.paths)

    def test_driver_shape_checked(self):
        class Bad:
            def simulate_chunk(self, rng, grid, rows, seed, path_offset):
                return np.zeros((rows, grid.n_times - 1))

        with pytest.raises(ModelError, match="shape"):
            simulate(Bad(), GRID, 4, 0)


class TestEstimatorSpec:
    def test_parse(self):
        assert CondExpEstimator.parse("analytic") == CondExpEstimator.analytic()
        assert CondExpEstimator.parse("binning:50") == CondExpEstimator.binning(50)
        assert CondExpEstimator.parse("regression:3") == CondExpEstimator.regression(3)

    def test_parse_errors(self):
        for bad in ("", "foo", "binning", "binning:x", "regression:", "analytic:3", "binning:0"):
            with pytest.raises(ValidationError):
                CondExpEstimator.parse(bad)

    def test_constructor_validation(self):
        with pytest.raises(ValidationError):
            CondExpEstimator("analytic", bins=3)
        with pytest.raises(ValidationError):
            CondExpEstimator("binning", bins=0)
        with pytest.raises(ValidationError):
            CondExpEstimator("regression", degree=7)
        with pytest.raises(ValidationError):
            CondExpEstimator("kernel")

    def test_label_round_trips(self):
        for e in (CondExpEstimator.analytic(), CondExpEstimator.binning(8), CondExpEstimator.regression(2)):
            assert CondExpEstimator.parse(e.label) == e


class TestEstimateCompensator:
    def test_analytic_is_exact_and_noiseless(self):
        batch = simulate(POISSON, GRID, 600, 31)
        est = estimate_compensator(batch, CondExpEstimator.analytic())
        assert np.max(np.abs(est.a_mean - 2.0 * GRID.times)) <= 1e-12
        assert np.max(est.a_se) == 0.0
        assert est.degenerate_steps == () and not est.monotone_flagged

    def test_analytic_needs_increment_mean(self):
        batch = simulate(_ConstantDriver(), GRID, 8, 0)
        with pytest.raises(ModelError, match="analytic"):
            estimate_compensator(batch, CondExpEstimator.analytic())

    @pytest.mark.parametrize(
        "estimator",
        [CondExpEstimator.binning(12), CondExpEstimator.regression(2)],
        ids=["binning", "regression"],
    )
    def test_fitted_mean_telescopes(self, estimator):
        # in-batch fits preserve cross-sectional means step by step, so the
        # mean estimated compensator is exactly mean(x_t - x_0)
        batch = simulate(GAUSS, GRID, 3000, 37)
        est = estimate_compensator(batch, estimator)
        want = (batch.paths - batch.paths[:, :1]).mean(axis=0)
        assert np.max(np.abs(est.a_mean - want)) <= 1e-10
        assert est.a_se[0] == 0.0 and np.all(est.a_se[1:] > 0.0)

    def test_degenerate_cross_sections_flagged(self):
        batch = simulate(_ConstantDriver(), GRID, 16, 0)
        for estimator in (CondExpEstimator.binning(4), CondExpEstimator.regression(3)):
            est = estimate_compensator(batch, estimator)
            assert est.degenerate_steps == tuple(range(GRID.n_steps))
            # constant paths: the fitted ramp is recovered exactly anyway
            assert np.max(np.abs(est.a_mean - GRID.times)) <= 1e-12

    def test_single_bin_is_global_mean(self):
        batch = simulate(GAUSS, GRID, 500, 41)
        est = estimate_compensator(batch, CondExpEstimator.binning(1))
        inc = np.diff(batch.paths, axis=1)
        states = np.linspace(-5.0, 5.0, 11)
        for k in range(1, GRID.n_steps):
            assert np.allclose(est.increment_mean(k, states), inc[:, k].mean(), atol=1e-12)

    def test_accumulate_matches_internal_profile(self):
        batch = simulate(GAUSS, GRID, 400, 43)
        est = estimate_compensator(batch, CondExpEstimator.binning(6))
        acc = est.accumulate(batch)
        assert np.max(np.abs(acc.mean(axis=0) - est.a_mean)) <= 1e-12
        other = simulate(GAUSS, dyadic_grid(2), 50, 1)
        with pytest.raises(DimensionError):
            est.accumulate(other)

    def test_needs_two_paths(self):
        batch = simulate(GAUSS, GRID, 1, 0)
        with pytest.raises(ValidationError):
            estimate_compensator(batch, CondExpEstimator.analytic())

    def test_binning_deviation_shrinks_like_root_n(self):
        # 16x the paths: terminal deviation from the analytic profile stays
        # inside 3 SE at both sizes and the SE contracts by ~sqrt(16)
        grid = dyadic_grid(6)
        spec = CondExpEstimator.binning(20)
        devs, ses = [], []
        for n in (4096, 65536):
            batch = simulate(POISSON, grid, n, 83)
            ref = estimate_compensator(batch, CondExpEstimator.analytic())
            fit = estimate_compensator(batch, spec)
            devs.append(abs(fit.a_mean[-1] - ref.a_mean[-1]))
            ses.append(fit.a_se[-1])
        assert devs[0] <= 3 * ses[0] and devs[1] <= 3 * ses[1]
        assert devs[1] < devs[0]
        assert 3.2 <= ses[0] / ses[1] <= 4.8


class TestResidualDiagnostics:
    def test_analytic_residuals_pass(self):
        batch = simulate(POISSON, GRID, 6000, 47)
        report = residual_martingale_test(batch, CondExpEstimator.analytic())
        assert report.max_abs_t < 4.0
        assert report.lags == 1
        assert len(report.t_stats) == GRID.n_steps

    def test_fitted_estimators_pass_on_held_out_half(self):
        batch = simulate(GAUSS, GRID, 8000, 53)
        for estimator in (CondExpEstimator.binning(20), CondExpEstimator.regression(3)):
            report = residual_martingale_test(batch, estimator)
            assert report.max_abs_t < 4.0, (estimator.label, report.max_abs_t)

    def test_wrong_drift_is_caught(self):
        # rate-3 drift against rate-2 paths: intercepts must blow up
        batch2 = simulate(POISSON, GRID, 4000, 59)
        batch3 = simulate(ModelSpec("mc-poisson", {"rate": 3.0}), GRID, 4000, 59)
        wrong = estimate_compensator(batch3, CondExpEstimator.analytic())
        report = residual_martingale_test(batch2, wrong)
        assert report.max_abs_t > 10.0

    def test_prefitted_estimate_runs_on_whole_batch(self):
        batch = simulate(GAUSS, GRID, 2000, 61)
        fit, test = split_batch(batch)
        est = estimate_compensator(fit, CondExpEstimator.binning(10))
        r1 = residual_martingale_test(test, est)
        r2 = residual_martingale_test(batch, CondExpEstimator.binning(10))
        assert np.array_equal(r1.times, r2.times)
        for a, b in zip(r1.t_stats, r2.t_stats):
            assert np.allclose(a, b, atol=1e-12)

    def test_first_step_drops_constant_state(self):
        batch = simulate(GAUSS, GRID, 300, 67)
        report = residual_martingale_test(batch, CondExpEstimator.analytic(), lags=2)
        assert report.t_stats[0].size == 1  # x_0 == 0 everywhere: intercept only
        assert report.t_stats[2].size == 3  # intercept + two lagged states
        assert report.n_stats == sum(s.size for s in report.t_stats)

    def test_lags_zero_is_intercept_only(self):
        batch = simulate(GAUSS, GRID, 300, 71)
        report = residual_martingale_test(batch, CondExpEstimator.analytic(), lags=0)
        assert all(s.size == 1 for s in report.t_stats)
        with pytest.raises(ValidationError):
            residual_martingale_test(batch, CondExpEstimator.analytic(), lags=-1)

    def test_estimator_type_checked(self):
        batch = simulate(GAUSS, GRID, 64, 0)
        with pytest.raises(ValidationError):
            residual_martingale_test(batch, "binning:4")

    def test_grid_mismatch(self):
        est = estimate_compensator(simulate(GAUSS, GRID, 64, 0), CondExpEstimator.analytic())
        other = simulate(GAUSS, dyadic_grid(2), 64, 0)
        with pytest.raises(DimensionError):
            residual_martingale_test(other, est)

    def test_custom_martingale_driver(self):
        driver = _PlainWalkDriver()
        batch = simulate(driver, GRID, 5000, 73)
        est = estimate_compensator(batch, CondExpEstimator.analytic())
        assert np.max(np.abs(est.a_mean)) == 0.0
        report = residual_martingale_test(batch, est)
        assert report.max_abs_t < 4.0
