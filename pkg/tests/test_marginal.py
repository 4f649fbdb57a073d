import numpy as np
import pytest
from scipy.stats import kurtosis, skew

from gaussdiff.marginal import (
    MarginalMap,
    degaussianize_1d,
    fit_marginal,
    gaussianize_1d,
    kde_pdf,
    marginal_cdf,
    marginal_inverse_cdf,
    silverman_bandwidth,
    std_normal_cdf,
    std_normal_inverse_cdf,
)
from gaussdiff.rng import make_rng, standard_normal

KERNEL_AT_ORIGIN = 0.39894228040143268  # 1/sqrt(2 pi), 50-digit oracle
# CDF of the standard normal at 1.959964, frozen from high-precision
# quadrature of the density (independent of the erf-based implementation).
PHI_AT_1959964 = 0.9750000009035576


def uniform_ks(u):
    """Sup distance between the empirical CDF of u and the uniform CDF."""
    u = np.sort(u)
    n = u.size
    return max((np.arange(1, n + 1) / n - u).max(), (u - np.arange(0, n) / n).max())


@pytest.fixture(scope="module")
def normal_samples():
    return standard_normal(make_rng(1234, "marginal-tests"), 10_000)


@pytest.fixture(scope="module")
def normal_map(normal_samples):
    return fit_marginal(normal_samples)


@pytest.fixture(scope="module")
def bimodal_samples():
    # equal mixture of N(-2, 0.25) and N(2, 0.25)
    rng = make_rng(77, "bimodal")
    z = standard_normal(rng, 10_000)
    signs = np.where(np.arange(10_000) % 2 == 0, -2.0, 2.0)
    return signs + 0.5 * z


class TestKdePdf:
    def test_point_mass_at_origin(self):
        assert kde_pdf(np.zeros(5), 1.0, 0.0) == pytest.approx(KERNEL_AT_ORIGIN, rel=1e-12)

    def test_symmetric_pair(self):
        h = 0.7
        expected = np.exp(-0.5 / h**2) / np.sqrt(2 * np.pi) / h
        assert kde_pdf(np.array([-1.0, 1.0]), h, 0.0) == pytest.approx(expected, rel=1e-12)

    def test_consistency_against_true_density(self, normal_samples):
        h = silverman_bandwidth(normal_samples)
        assert kde_pdf(normal_samples, h, 0.0) == pytest.approx(KERNEL_AT_ORIGIN, abs=0.03)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            kde_pdf(np.array([0.0, 1.0]), 0.0, 0.0)
        with pytest.raises(ValueError):
            kde_pdf(np.array([0.0]), 1.0, 0.0)


class TestFitMarginal:
    def test_tail_limits(self, normal_map):
        assert normal_map.cdf_values[0] < 1e-4
        assert normal_map.cdf_values[-1] > 1 - 1e-4

    def test_symmetry_about_center(self):
        # exactly symmetric sample set about c by reflection
        delta = np.abs(standard_normal(make_rng(3), 500)) + 0.05
        c = 1.7
        samples = np.concatenate([c + delta, c - delta])
        m = fit_marginal(samples)
        assert marginal_cdf(m, c) == pytest.approx(0.5, abs=1e-3)

    def test_monotone_cdf_sweep(self):
        rng = make_rng(8, "sweep")
        for _ in range(100):
            n = int(rng.integers(10, 200))
            samples = standard_normal(rng, n) * float(rng.random() * 3 + 0.1)
            if rng.random() < 0.5:
                samples = np.concatenate([samples, samples + float(rng.random() * 10)])
            m = fit_marginal(samples)
            assert np.all(np.diff(m.cdf_values) >= 0.0)

    def test_unnormalized_integral_near_one(self, normal_samples):
        m = fit_marginal(normal_samples)
        pdf = kde_pdf(normal_samples, m.bandwidth, m.grid)
        assert 0.999 <= np.trapezoid(pdf, m.grid) <= 1.001

    def test_degenerate_inputs(self):
        with pytest.raises(ValueError):
            fit_marginal(np.ones(50))
        with pytest.raises(ValueError):
            fit_marginal(np.arange(5.0))


class TestMarginalCdf:
    def test_clamping_far_outside_grid(self, normal_map):
        assert marginal_cdf(normal_map, -1e6) == normal_map.clamp_lo
        assert marginal_cdf(normal_map, 1e6) == normal_map.clamp_hi

    def test_interpolation_knots(self, normal_map):
        k = len(normal_map.grid) // 2
        assert marginal_cdf(normal_map, normal_map.grid[k]) == pytest.approx(
            normal_map.cdf_values[k], abs=1e-12)

    def test_probability_integral_transform(self, normal_samples, normal_map):
        u = marginal_cdf(normal_map, normal_samples)
        assert uniform_ks(u) < 0.03

    def test_result_always_in_clamp_range(self, normal_map):
        z = np.linspace(-20, 20, 1001)
        u = marginal_cdf(normal_map, z)
        assert np.all((u >= normal_map.clamp_lo) & (u <= normal_map.clamp_hi))


class TestMarginalInverseCdf:
    def test_round_trip_central_quantiles(self, normal_samples, normal_map):
        lo, hi = np.quantile(normal_samples, [0.005, 0.995])
        z = np.linspace(lo, hi, 500)
        back = marginal_inverse_cdf(normal_map, marginal_cdf(normal_map, z))
        spacing = normal_map.grid[1] - normal_map.grid[0]
        assert np.max(np.abs(back - z)) < 2 * spacing

    def test_knot_inversion(self, normal_map):
        k = len(normal_map.grid) // 3
        assert marginal_inverse_cdf(normal_map, normal_map.cdf_values[k]) == pytest.approx(
            normal_map.grid[k], abs=1e-9)

    def test_forward_of_inverse_sweep(self, normal_map):
        u = make_rng(6).random(1000) * 0.98 + 0.01
        u_back = marginal_cdf(normal_map, marginal_inverse_cdf(normal_map, u))
        assert np.max(np.abs(u_back - u)) < 1e-6

    def test_domain_errors(self, normal_map):
        for bad in (0.0, 1.0, -0.2, 1.3, np.nan):
            with pytest.raises(ValueError):
                marginal_inverse_cdf(normal_map, bad)


class TestStdNormal:
    def test_symmetry_point(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_inverse_cdf(0.5) == 0.0

    def test_reflection(self):
        z = np.linspace(-8, 8, 321)
        assert np.max(np.abs(std_normal_cdf(-z) - (1.0 - std_normal_cdf(z)))) < 1e-12

    def test_against_quadrature_oracle(self):
        assert std_normal_cdf(1.959964) == pytest.approx(PHI_AT_1959964, abs=1e-9)
        assert abs(std_normal_cdf(1.959964) - 0.975000) < 1e-6

    def test_inverse_round_trip(self):
        z = np.linspace(-6, 6, 241)
        assert np.max(np.abs(std_normal_inverse_cdf(std_normal_cdf(z)) - z)) < 1e-8

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            std_normal_inverse_cdf(0.0)
        with pytest.raises(ValueError):
            std_normal_inverse_cdf(1.0)
        with pytest.raises(ValueError):
            std_normal_cdf(np.inf)


class TestGaussianize1d:
    def test_round_trip(self, normal_samples, normal_map):
        lo, hi = np.quantile(normal_samples, [0.005, 0.995])
        z = np.linspace(lo, hi, 400)
        back = degaussianize_1d(normal_map, gaussianize_1d(normal_map, z))
        spacing = normal_map.grid[1] - normal_map.grid[0]
        assert np.max(np.abs(back - z)) < 2 * spacing

    def test_training_samples_become_normal(self, normal_samples, normal_map):
        from gaussdiff.evalkit import ks_statistic
        y = gaussianize_1d(normal_map, normal_samples)
        assert ks_statistic(y) < 0.03

    def test_bimodal_becomes_unimodal(self, bimodal_samples):
        # full-sample Silverman oversmooths a bimodal set (sigma is inflated
        # by the mode separation); use the per-mode scale as the manual h
        m = fit_marginal(bimodal_samples, bandwidth=0.1)
        y = gaussianize_1d(m, bimodal_samples)
        assert abs(skew(y)) < 0.1
        assert abs(kurtosis(y)) < 0.2

    def test_strictly_increasing_where_unclamped(self, bimodal_samples):
        m = fit_marginal(bimodal_samples)
        inside = (m.cdf_values > m.clamp_lo) & (m.cdf_values < m.clamp_hi)
        y = gaussianize_1d(m, m.grid[inside])
        assert np.all(np.diff(y) > 0.0)

    def test_out_of_range_inverse_clamps(self, normal_map):
        # far beyond the clamp image: maps to the fitted range, no blow-up
        lo = degaussianize_1d(normal_map, -50.0)
        hi = degaussianize_1d(normal_map, 50.0)
        assert normal_map.grid[0] <= lo < hi <= normal_map.grid[-1]


def test_marginal_map_validation():
    grid = np.linspace(0, 1, 8)
    good = np.linspace(0, 1, 8)
    with pytest.raises(ValueError):
        MarginalMap(grid=grid[::-1], cdf_values=good, bandwidth=0.1, clamp_lo=0.01, clamp_hi=0.99)
    with pytest.raises(ValueError):
        MarginalMap(grid=grid, cdf_values=good[::-1], bandwidth=0.1, clamp_lo=0.01, clamp_hi=0.99)
    with pytest.raises(ValueError):
        MarginalMap(grid=grid, cdf_values=good, bandwidth=-1.0, clamp_lo=0.01, clamp_hi=0.99)
    with pytest.raises(ValueError):
        MarginalMap(grid=grid, cdf_values=good, bandwidth=0.1, clamp_lo=0.6, clamp_hi=0.4)
