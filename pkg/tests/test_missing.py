"""Missing-data machinery: mechanisms, selection recovery, observed fit."""

import numpy as np
import pytest

from spefit import (Dataset, EstimationError, KernelSpec, LfcEvaluator,
                    MissingMechanism, ProfileObjective, SearchConfig,
                    apply_missingness, exp3_config, fit, fit_observed,
                    g1_recover, g_correction, g_functional, generate,
                    lfc_at, lfc_observed)

IDX = KernelSpec(0.8)
YK = KernelSpec(0.9)


class TestMechanisms:
    def test_decomposable_indicator_probabilities(self):
        mech = MissingMechanism("decomposable_indicator", 0.6)
        assert mech.observation_probability(1.0, 1.0) == 0.6
        assert mech.observation_probability(-1.0, 5.0) == 0.0
        assert mech.observation_probability(1.0, -0.5) == 0.0

    def test_nondecomposable_line_probabilities(self):
        mech = MissingMechanism("nondecomposable_line", 0.9)
        assert mech.observation_probability(1.0, 2.0) == 0.9  # 1.8 < 2
        assert mech.observation_probability(1.0, 1.5) == 0.0  # 1.8 >= 1.5

    def test_invalid_mechanism_rejected(self):
        with pytest.raises(ValueError):
            MissingMechanism("other", 0.5)
        with pytest.raises(ValueError):
            MissingMechanism("decomposable_indicator", 1.5)

    def test_apply_missingness_deterministic(self):
        rng_a = np.random.default_rng(5)
        rng_b = np.random.default_rng(5)
        data = Dataset(np.linspace(0.5, 2, 20)[:, None], np.linspace(0.5, 4, 20))
        mech = MissingMechanism("decomposable_indicator", 0.7)
        a = apply_missingness(data, mech, rng_a)
        b = apply_missingness(data, mech, rng_b)
        np.testing.assert_array_equal(a.delta, b.delta)
        assert 0 < a.delta.sum() <= 20

    def test_all_missing_raises(self):
        data = Dataset(np.array([[-1.0], [-2.0]]), np.array([1.0, 2.0]))
        mech = MissingMechanism("decomposable_indicator", 0.9)
        with pytest.raises(EstimationError, match="all data missing"):
            apply_missingness(data, mech, np.random.default_rng(0))

    def test_observed_fraction_matches_independent_estimate(self):
        config = exp3_config("decomposable_indicator", 0.6, n=20000,
                             replications=1, master_seed=99)
        data = generate(config, 0)
        observed_fraction = data.delta.mean()
        rng = np.random.default_rng(12345)
        x = 2.0 + rng.standard_normal(200_000)
        y = 2.0 * x + np.sqrt(1.1) * rng.standard_normal(200_000)
        expected = 0.6 * np.mean((x > 0) & (y > 0))
        assert observed_fraction == pytest.approx(expected, abs=0.02)


class TestLfcObserved:
    def test_fully_observed_is_bitwise_identical(self):
        rng = np.random.default_rng(2)
        data = Dataset(rng.normal(1, 1, 12)[:, None], rng.normal(0, 2, 12))
        full = LfcEvaluator([1.1], data, IDX, YK)
        observed = lfc_observed([1.1], data, IDX, YK)
        for y in (-0.5, 0.4, 1.7):
            assert observed(y) == lfc_at(full, y)
        np.testing.assert_array_equal(observed.loo_log_at_samples(),
                                      full.loo_log_at_samples())

    def test_zero_coefficients_collapse(self):
        rng = np.random.default_rng(3)
        data = Dataset(rng.normal(1, 1, 10)[:, None], rng.normal(0, 2, 10),
                       np.array([1, 1, 1, 0, 1, 1, 0, 1, 1, 1]))
        observed = lfc_observed([0.0], data, IDX, YK)
        assert observed(0.3) == pytest.approx(1.0, abs=1e-12)

    def test_subset_equivalence(self):
        x = np.array([[0.5], [1.0], [2.0], [1.4]])
        y = np.array([0.8, 1.9, 4.2, 2.6])
        with_flag = Dataset(x, y, np.array([1, 1, 1, 0]))
        reduced = Dataset(x[:3], y[:3])
        ev_flagged = lfc_observed([0.9], with_flag, IDX, YK)
        ev_reduced = LfcEvaluator([0.9], reduced, IDX, YK)
        for point in (0.5, 1.9, 3.0):
            assert ev_flagged(point) == ev_reduced(point)

    def test_too_few_observed(self):
        data = Dataset(np.array([[1.0], [2.0], [3.0]]), np.array([1.0, 2.0, 3.0]),
                       np.array([1, 1, 0]))
        with pytest.raises(EstimationError, match="too few observed rows"):
            lfc_observed([1.0], data, IDX, YK)


class TestG1Recover:
    def test_normal_mode_inversion(self):
        assert g1_recover(lambda y: 1.0 / np.sqrt(2 * np.pi), 0.0) == \
            pytest.approx(1.0)

    def test_normal_density_gives_unit_selection(self):
        phi = lambda y: np.exp(-0.5 * y * y) / np.sqrt(2 * np.pi)
        for y in (-2.0, 0.0, 1.5, 3.0):
            assert g1_recover(phi, y) == pytest.approx(1.0, rel=1e-12)

    def test_direct_evaluation(self):
        assert g1_recover(lambda y: 0.1, 1.0) == pytest.approx(
            np.sqrt(2 * np.pi) * 0.1 * np.exp(0.5), rel=1e-12)

    def test_overflow_guard(self):
        with pytest.raises(EstimationError, match="g1 overflow"):
            g1_recover(lambda y: 1.0, 39.0)

    def test_dispersion_scales_guard_and_value(self):
        # With dispersion s the Gaussian factor is N(0, s).
        s = 1.1
        f_m = lambda y: np.exp(-0.5 * y * y / s) / np.sqrt(2 * np.pi * s)
        assert g1_recover(f_m, 1.3, dispersion=s) == pytest.approx(1.0, rel=1e-12)


class TestGFunctional:
    def test_unit_selection_is_zero(self):
        assert g_functional(0.7, lambda y: np.ones_like(y), (-15, 15)) == \
            pytest.approx(0.0, abs=1e-6)

    def test_half_line_indicator(self):
        # The grid cell at the jump carries half a node of extra mass, so
        # the tolerance reflects one trapezoid cell.
        g1 = lambda y: (y >= 0).astype(float)
        assert g_functional(0.0, g1, (-10, 10)) == pytest.approx(
            np.log(0.5), abs=5e-3)

    def test_translation_invariance_with_unit_selection(self):
        for theta in (-2.0, 0.0, 3.0):
            value = g_functional(theta, lambda y: np.ones_like(y), (-25, 25))
            assert value == pytest.approx(0.0, abs=1e-6)

    def test_zero_integral_raises(self):
        g1 = lambda y: np.zeros_like(y)
        with pytest.raises(EstimationError, match="zero integral"):
            g_functional(0.0, g1, (-5, 5))


class TestGCorrection:
    def test_vanishes_for_constant_selection(self):
        for center in (-3.0, 0.0, 2.0):
            assert g_correction(center, lambda y: np.ones_like(y), (-25, 25)) == \
                pytest.approx(0.0, abs=1e-6)

    def test_positive_selection_shift(self):
        g1 = lambda y: (y >= 0).astype(float)
        # Conditioning a standard normal at 0 on positivity shifts the mean
        # to sqrt(2/pi).
        assert g_correction(0.0, g1, (-10, 10)) == pytest.approx(
            np.sqrt(2 / np.pi), abs=5e-3)


class TestFitObserved:
    def test_complete_data_matches_profile_fit(self):
        config = exp3_config("decomposable_indicator", 0.8, n=80,
                             replications=1, master_seed=31, sigma2=1.0)
        rng_data = generate(config, 0)
        complete = Dataset(rng_data.x, rng_data.y)  # ignore the flags
        search = SearchConfig.box(-10, 10)
        observed_fit = fit_observed(complete, search)
        profile_fit = fit(ProfileObjective(complete, b_path="quadrature"),
                          search)
        assert observed_fit.beta_O[0] == pytest.approx(
            profile_fit.beta_hat[0], abs=1e-2)

    def test_unit_selection_collapse_of_g1(self):
        # With complete data and the true coefficients, the recovered
        # selection factor is near-constant over the data range.
        config = exp3_config("decomposable_indicator", 0.8, n=300,
                             replications=1, master_seed=32, sigma2=1.0)
        data = generate(config, 0)
        complete = Dataset(data.x, data.y)
        result = fit_observed(complete, SearchConfig.box(-10, 10))
        mid = result.g1_tilde(4.0)
        for y in (2.0, 4.0, 6.0):
            assert result.g1_tilde(y) == pytest.approx(mid, rel=0.5)

    def test_predict_is_continuous(self):
        config = exp3_config("nondecomposable_line", 0.9, n=120,
                             replications=1, master_seed=33)
        data = generate(config, 0)
        result = fit_observed(data, SearchConfig.box(-10, 10),
                              dispersion=1.1)
        xs = np.linspace(1.0, 3.0, 9)
        values = np.array([result.predict([x]) for x in xs])
        steps = np.abs(np.diff(values))
        assert np.all(steps < 1.0)
        assert np.all(np.isfinite(values))

    def test_too_few_observed_rows(self):
        data = Dataset(np.array([[1.0], [2.0], [3.0]]),
                       np.array([1.0, 2.0, 3.0]), np.array([1, 1, 0]))
        with pytest.raises(EstimationError, match="too few observed rows"):
            fit_observed(data, SearchConfig.box(-10, 10))

    @pytest.mark.slow
    def test_mechanism_one_reference_band(self):
        # c=0.8, n=200 reference row: mean 2.01 +- 0.08 over 100 replications.
        config = exp3_config("decomposable_indicator", 0.8, n=200,
                             replications=100, master_seed=20250811,
                             estimators=("outcome_regression",))
        from spefit import replication_estimates
        estimates = []
        for rep in range(config.replications):
            est = replication_estimates(config, rep)["outcome_regression"]
            if est is not None:
                estimates.append(est[0])
        assert len(estimates) >= 95
        assert np.mean(estimates) == pytest.approx(2.01, abs=0.08)
