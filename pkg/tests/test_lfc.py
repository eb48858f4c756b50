"""Least-favorable-curve estimation, including brute-force oracles.

The oracle functions below re-implement the documented estimator
contract with plain Python loops, independently of the vectorized
batch code under test.
"""

import numpy as np
import pytest

from spefit import (Dataset, EstimationError, IsolatedYError, KernelSpec,
                    LfcEvaluator, cum_index_integral, lfc_at, standardize)
from spefit.kernels import kernel_eval
from spefit.lfc import CUM_GRID_POINTS
from spefit.numerics import cumulative_trapezoid

IDX = KernelSpec(0.8)
YK = KernelSpec(0.9)


def toy_dataset():
    x = np.array([[0.5], [1.0], [2.0]])
    y = np.array([0.8, 1.9, 4.2])
    return Dataset(x, y)


def oracle_log_denominators(beta, data, index_kernel):
    """Loop re-computation of the cached cumulative index integrals."""
    thetas = np.array([float(np.dot(beta, row)) for row in data.x])
    lo, hi = min(0.0, thetas.min()), max(0.0, thetas.max())
    nodes = np.union1d(np.linspace(lo, hi, CUM_GRID_POINTS),
                       np.append(thetas, 0.0))
    m_vals = []
    for t in nodes:
        num = den = 0.0
        for tj, yj in zip(thetas, data.y):
            w = kernel_eval(index_kernel, tj - t)
            num += yj * w
            den += w
        m_vals.append(num / den)
    running = cumulative_trapezoid(np.array(m_vals), nodes)
    at_zero = running[int(np.searchsorted(nodes, 0.0))]
    return thetas, np.array([
        running[int(np.searchsorted(nodes, t))] - at_zero for t in thetas
    ])


def oracle_curve(beta, data, index_kernel, y_kernel, y, exclude=None,
                 renormalize=True):
    """Spreadsheet-style evaluation of the curve estimator at one point."""
    thetas, log_den = oracle_log_denominators(beta, data, index_kernel)
    kvals = [kernel_eval(y_kernel, yi - y) for yi in data.y]
    keep = [i for i in range(data.n) if i != exclude]
    norm_idx = keep if (renormalize and exclude is not None) else range(data.n)
    ksum = sum(kvals[i] for i in norm_idx)
    total = sum(np.exp(thetas[i] * y - log_den[i]) * kvals[i] / ksum
                for i in keep)
    return 1.0 / total


class TestCumIndexIntegral:
    def test_empty_interval_is_exactly_zero(self):
        assert cum_index_integral([1.0], toy_dataset(), IDX, 0.0) == 0.0

    def test_noiseless_identity_link(self):
        xs = np.linspace(-3.0, 3.0, 201)
        data = Dataset(xs[:, None], xs.copy())
        spec = KernelSpec(0.3)
        for theta in (1.0, 2.0, -1.5):
            value = cum_index_integral([1.0], data, spec, theta)
            assert value == pytest.approx(theta ** 2 / 2.0, rel=0.02)

    def test_orientation_for_negative_upper_limit(self):
        xs = np.linspace(-3.0, 3.0, 101)
        data = Dataset(xs[:, None], xs + 1.0)
        spec = KernelSpec(0.4)
        forward = cum_index_integral([1.0], data, spec, 2.0)
        assert forward > 0
        # Integrand is positive near 0 going left, so oriented value < 0.
        assert cum_index_integral([1.0], data, spec, -0.5) < 0

    def test_additivity_under_shared_grid(self):
        data = toy_dataset()
        thetas, log_den = oracle_log_denominators([1.3], data, IDX)
        # Cached integrals all come from one shared cumulative grid, so
        # differences telescope.
        ev = LfcEvaluator([1.3], data, IDX, YK)
        np.testing.assert_allclose(ev.log_denominators, log_den, rtol=1e-12)
        d01 = ev.log_denominators[1] - ev.log_denominators[0]
        d12 = ev.log_denominators[2] - ev.log_denominators[1]
        d02 = ev.log_denominators[2] - ev.log_denominators[0]
        assert d01 + d12 == pytest.approx(d02, abs=1e-12)

    def test_quadrature_tolerance_additivity(self):
        xs = np.linspace(-3.0, 3.0, 151)
        data = Dataset(xs[:, None], 2.0 * xs)
        spec = KernelSpec(0.4)
        v1 = cum_index_integral([1.0], data, spec, 1.0)
        v2 = cum_index_integral([1.0], data, spec, 2.0)
        # Composite value over [1, 2] from the closed-form-free difference.
        xs_seg = np.linspace(1.0, 2.0, 201)
        from spefit import nw_regress
        seg = np.trapezoid(nw_regress(xs, 2.0 * xs, spec, xs_seg), xs_seg)
        assert v2 == pytest.approx(v1 + seg, rel=1e-3)


class TestLfcAt:
    def test_zero_coefficients_collapse_to_one(self):
        ev = LfcEvaluator([0.0], toy_dataset(), IDX, YK)
        for y in (-1.0, 0.5, 3.3):
            assert lfc_at(ev, y) == pytest.approx(1.0, abs=1e-12)
        loo = np.exp(ev.loo_log_at_samples())
        np.testing.assert_allclose(loo, 1.0, atol=1e-12)

    def test_brute_force_oracle_three_points(self):
        data = toy_dataset()
        beta = [1.2]
        ev = LfcEvaluator(beta, data, IDX, YK)
        for y in (0.5, 1.9, 3.0):
            assert lfc_at(ev, y) == pytest.approx(
                oracle_curve(beta, data, IDX, YK, y), rel=1e-10)

    def test_brute_force_oracle_leave_one_out(self):
        data = toy_dataset()
        beta = [0.7]
        ev = LfcEvaluator(beta, data, IDX, YK)
        for k in range(data.n):
            expected = oracle_curve(beta, data, IDX, YK, float(data.y[k]),
                                    exclude=k)
            assert lfc_at(ev, float(data.y[k]), exclude=k) == pytest.approx(
                expected, rel=1e-10)
            batch = np.exp(ev.loo_log_at_samples())
            assert batch[k] == pytest.approx(expected, rel=1e-10)

    def test_literal_weight_denominator_switch(self):
        data = toy_dataset()
        ev = LfcEvaluator([0.7], data, IDX, YK, renormalize_loo=False)
        expected = oracle_curve([0.7], data, IDX, YK, float(data.y[1]),
                                exclude=1, renormalize=False)
        assert lfc_at(ev, float(data.y[1]), exclude=1) == pytest.approx(
            expected, rel=1e-10)

    def test_denominator_scaling_is_multiplicative(self):
        data = toy_dataset()
        ev = LfcEvaluator([1.2], data, IDX, YK)
        scaled = LfcEvaluator([1.2], data, IDX, YK)
        scaled.log_denominators = ev.log_denominators + np.log(2.5)
        for y in (0.5, 2.0):
            assert scaled(y) == pytest.approx(2.5 * ev(y), rel=1e-12)

    def test_positive_wherever_defined(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.normal(1, 1, 30)[:, None],
                       rng.normal(0, 2, 30))
        ev = LfcEvaluator([1.5], data, IDX, YK)
        for y in np.linspace(-3, 3, 11):
            assert ev(y) > 0

    def test_loo_equals_full_when_excluded_weight_vanishes(self):
        # Compact kernel: observation 0 is farther than one bandwidth from y.
        data = Dataset(np.array([[0.5], [1.0], [2.0]]),
                       np.array([5.0, 1.9, 2.2]))
        epa = KernelSpec(1.0, "epanechnikov")
        ev = LfcEvaluator([0.8], data, IDX, epa)
        y = 2.05  # |5.0 - y| > h, so observation 0 carries zero weight
        assert lfc_at(ev, y, exclude=0) == pytest.approx(lfc_at(ev, y), rel=1e-14)

    def test_isolated_point_raises(self):
        data = toy_dataset()
        ev = LfcEvaluator([1.0], data, IDX, KernelSpec(0.05))
        with pytest.raises(IsolatedYError, match="isolated y"):
            lfc_at(ev, 30.0)

    def test_overflow_raises(self):
        data = toy_dataset()
        ev = LfcEvaluator([1.0], data, IDX, YK)
        ev.log_denominators = ev.log_denominators + 800.0
        with pytest.raises(EstimationError, match="lfc overflow"):
            lfc_at(ev, 1.9)

    def test_local_likelihood_stationarity(self):
        # The curve value maximizes the kernel-weighted local likelihood
        # v -> sum_i W_i(y) * (log v - v * exp(theta_i y - D_i)), the
        # per-point likelihood with the normalizer linearized at the
        # cached integrals.
        data = toy_dataset()
        ev = LfcEvaluator([1.1], data, IDX, YK)
        y = 1.5
        value = lfc_at(ev, y)
        kvals = kernel_eval(YK, data.y - y)
        weights = kvals / kvals.sum()
        rates = np.exp(ev.index_values * y - ev.log_denominators)

        def local_loglik(v):
            return float(np.sum(weights * (np.log(v) - v * rates)))

        grid = value * np.linspace(0.2, 3.0, 801)
        values = [local_loglik(v) for v in grid]
        best = grid[int(np.argmax(values))]
        assert best == pytest.approx(value, rel=0.01)


class TestStandardize:
    def test_scaling_invariance(self):
        data = toy_dataset()
        ev = LfcEvaluator([0.9], data, IDX, YK)
        scaled = LfcEvaluator([0.9], data, IDX, YK)
        scaled.log_denominators = ev.log_denominators + np.log(4.0)
        norm1, f1 = standardize(ev)
        norm2, f2 = standardize(scaled)
        assert norm2 == pytest.approx(4.0 * norm1, rel=1e-10)
        assert f2(1.2) == pytest.approx(f1(1.2), rel=1e-10)

    def test_uniform_normalizer_near_one(self):
        rng = np.random.default_rng(11)
        n = 500
        data = Dataset(rng.normal(0, 1, n)[:, None], rng.uniform(0, 1, n))
        from spefit.kernels import bandwidth_rule
        yk = KernelSpec(bandwidth_rule(data.y))
        ev = LfcEvaluator([0.0], data, KernelSpec(1.0), yk)
        normalizer, _ = standardize(ev)
        # Curve is identically 1, so the normalizer estimates the support
        # length; kernel boundary bias keeps it a little above 1.
        assert normalizer == pytest.approx(1.0, abs=0.15)

    def test_density_floor_raises(self):
        data = Dataset(np.array([[0.0], [1.0], [2.0]]),
                       np.array([0.0, 1.0, 200.0]))
        ev = LfcEvaluator([0.0], data, IDX, KernelSpec(0.3))
        with pytest.raises(EstimationError):
            standardize(ev)

    def test_gaussian_geometry_recovers_normal_density(self):
        from spefit import ProfileObjective, exp1_config, generate
        config = exp1_config(n=400, replications=1, master_seed=13,
                             mu=1.0, sigma2=1.0)
        data = generate(config, 0)
        objective = ProfileObjective(data)
        evaluator = objective.evaluator_for([2.0])
        _, f_hat = standardize(evaluator)
        assert f_hat(0.0) == pytest.approx(1.0 / np.sqrt(2 * np.pi), abs=0.05)


@pytest.mark.slow
class TestConsistency:
    def test_sup_gap_shrinks_with_sample_size(self):
        # At the true coefficients the standardized curve approaches the
        # normal density: the median sup-gap over a fixed grid halves as
        # n doubles (up to Monte Carlo slack).
        from spefit import ProfileObjective, exp1_config, generate
        grid = np.linspace(-2.5, 2.5, 21)
        sup_gaps = {}
        for n in (100, 200):
            gaps = []
            for rep in range(50):
                config = exp1_config(n=n, replications=1, master_seed=101,
                                     mu=1.0, sigma2=1.0)
                data = generate(config, rep)
                objective = ProfileObjective(data)
                evaluator = objective.evaluator_for([2.0])
                try:
                    _, f_hat = standardize(evaluator)
                    vals = np.array([f_hat(y) for y in grid])
                except EstimationError:
                    continue
                rescaled = vals * np.sqrt(2 * np.pi)
                truth = np.exp(-0.5 * grid ** 2)
                gaps.append(np.max(np.abs(rescaled - truth)))
            sup_gaps[n] = float(np.median(gaps))
        assert sup_gaps[200] < sup_gaps[100]
