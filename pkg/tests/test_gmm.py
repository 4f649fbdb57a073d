import math

import numpy as np
import pytest

from gaussdiff.gmm import (
    Dataset,
    GmmSpec,
    average_log_likelihood,
    default_spec,
    gmm_log_densities,
    gmm_log_density,
    load_dataset_csv,
    load_spec_json,
    reference_log_likelihood,
    sample_gmm,
    save_dataset_csv,
    save_spec_json,
)

# Oracle values frozen from 50-digit-precision direct computation.
NEG_LOG_2PI = -1.8378770664093455          # standard-normal log density at the mode, d=2
STD_NORMAL_ENTROPY_2D = -2.8378770664093455  # -(1 + log 2pi)
DEFAULT_SPEC_LL_AT_ORIGIN = -17.837877066409345  # four equidistant components, mahalanobis 32


def naive_log_density(spec, x):
    """Direct probability summation over components (no log-sum-exp)."""
    total = 0.0
    d = spec.dim
    for w, mu, cov in zip(spec.weights, spec.means, spec.covariances):
        diff = x - mu
        quad = diff @ np.linalg.inv(cov) @ diff
        norm = math.sqrt((2.0 * math.pi) ** d * np.linalg.det(cov))
        total += w * math.exp(-0.5 * quad) / norm
    return math.log(total)


def test_spec_validation_rejects_bad_inputs():
    eye = np.eye(2)[None, :, :]
    with pytest.raises(ValueError):
        GmmSpec(weights=np.array([0.5, 0.6]), means=np.zeros((2, 2)),
                covariances=np.tile(np.eye(2), (2, 1, 1)))
    with pytest.raises(ValueError):
        GmmSpec(weights=np.array([1.0, 0.0]), means=np.zeros((2, 2)),
                covariances=np.tile(np.eye(2), (2, 1, 1)))
    with pytest.raises(ValueError):
        GmmSpec(weights=np.array([1.0]), means=np.zeros((1, 2)),
                covariances=np.array([[[1.0, 0.0], [0.5, 1.0]]]))  # asymmetric
    with pytest.raises(ValueError):
        GmmSpec(weights=np.array([1.0]), means=np.zeros((1, 2)),
                covariances=-eye)  # not positive definite
    with pytest.raises(ValueError):
        GmmSpec(weights=np.array([1.0]), means=np.zeros((1, 3)), covariances=eye)


def test_sample_empty_dataset(four_cluster_spec):
    ds = sample_gmm(four_cluster_spec, 0, seed=1)
    assert ds.points.shape == (0, 2)


def test_sample_deterministic(four_cluster_spec):
    a = sample_gmm(four_cluster_spec, 500, seed=42)
    b = sample_gmm(four_cluster_spec, 500, seed=42)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, sample_gmm(four_cluster_spec, 500, seed=43).points)


def test_sample_standard_normal_moments(std_normal_spec):
    # law of large numbers; bounds sized to ~3/sqrt(n)
    ds = sample_gmm(std_normal_spec, 100_000, seed=7)
    assert np.max(np.abs(ds.points.mean(axis=0))) < 0.02
    assert np.max(np.abs(np.cov(ds.points, rowvar=False) - np.eye(2))) < 0.05


def test_sample_component_frequencies():
    weights = np.array([0.1, 0.2, 0.3, 0.4])
    spec = GmmSpec(weights=weights, means=default_spec().means,
                   covariances=np.tile(0.25 * np.eye(2), (4, 1, 1)))
    n = 20_000
    ds = sample_gmm(spec, n, seed=3)
    # clusters are ~16 sigma apart, so nearest-mean assignment recovers the component
    assign = np.argmin(((ds.points[:, None, :] - spec.means[None]) ** 2).sum(-1), axis=1)
    freqs = np.bincount(assign, minlength=4) / n
    bound = 4.0 * np.sqrt(weights * (1.0 - weights) / n)
    assert np.all(np.abs(freqs - weights) < bound)


def test_log_density_standard_normal_mode(std_normal_spec):
    assert gmm_log_density(std_normal_spec, np.zeros(2)) == pytest.approx(NEG_LOG_2PI, abs=1e-12)


def test_log_density_duplicate_components_degenerate(std_normal_spec):
    dup = GmmSpec(weights=np.array([0.5, 0.5]), means=np.zeros((2, 2)),
                  covariances=np.tile(np.eye(2), (2, 1, 1)))
    for x in (np.zeros(2), np.array([0.3, -1.2])):
        assert gmm_log_density(dup, x) == pytest.approx(gmm_log_density(std_normal_spec, x), abs=1e-12)


def test_log_density_default_spec_at_origin(four_cluster_spec):
    assert gmm_log_density(four_cluster_spec, np.zeros(2)) == pytest.approx(
        DEFAULT_SPEC_LL_AT_ORIGIN, abs=1e-10)


def test_log_density_matches_naive_sum():
    rng = np.random.default_rng(5)
    for _ in range(20):
        k = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        weights = rng.random(k) + 0.1
        weights /= weights.sum()
        means = rng.normal(size=(k, d))
        covs = np.empty((k, d, d))
        for i in range(k):
            a = rng.normal(size=(d, d))
            covs[i] = a @ a.T + 0.5 * np.eye(d)
        spec = GmmSpec(weights=weights, means=means, covariances=covs)
        x = rng.normal(size=d)
        naive = naive_log_density(spec, x)
        assert gmm_log_density(spec, x) == pytest.approx(naive, rel=1e-10)


def test_log_density_far_tail_stays_finite(four_cluster_spec):
    # log-space evaluation where the naive sum would underflow to 0
    val = gmm_log_density(four_cluster_spec, np.array([60.0, -60.0]))
    assert np.isfinite(val) and val < -1000.0


def test_log_density_dimension_mismatch(four_cluster_spec):
    with pytest.raises(ValueError):
        gmm_log_density(four_cluster_spec, np.zeros(3))
    with pytest.raises(ValueError):
        gmm_log_densities(four_cluster_spec, np.zeros((4, 3)))


def test_average_single_sample(four_cluster_spec):
    x = np.array([1.0, -2.0])
    avg = average_log_likelihood(four_cluster_spec, Dataset(points=x[None, :]))
    assert avg == pytest.approx(gmm_log_density(four_cluster_spec, x), abs=1e-14)


def test_average_duplication_and_permutation_invariance(four_cluster_spec):
    ds = sample_gmm(four_cluster_spec, 200, seed=9)
    base = average_log_likelihood(four_cluster_spec, ds)
    doubled = np.vstack([ds.points, ds.points])
    assert average_log_likelihood(four_cluster_spec, doubled) == pytest.approx(base, abs=1e-12)
    perm = ds.points[np.random.default_rng(0).permutation(200)]
    assert average_log_likelihood(four_cluster_spec, perm) == pytest.approx(base, abs=1e-12)


def test_average_empty_dataset_errors(four_cluster_spec):
    with pytest.raises(ValueError):
        average_log_likelihood(four_cluster_spec, np.zeros((0, 2)))


def test_average_matches_entropy_oracle(std_normal_spec):
    ds = sample_gmm(std_normal_spec, 100_000, seed=21)
    avg = average_log_likelihood(std_normal_spec, ds)
    assert avg == pytest.approx(STD_NORMAL_ENTROPY_2D, abs=0.02)


def test_reference_log_likelihood(std_normal_spec):
    ref = reference_log_likelihood(std_normal_spec, 100_000, seed=4)
    assert ref == pytest.approx(STD_NORMAL_ENTROPY_2D, abs=0.02)
    assert ref == reference_log_likelihood(std_normal_spec, 100_000, seed=4)
    smaller = reference_log_likelihood(std_normal_spec, 10_000, seed=4)
    assert abs(smaller - ref) < 0.05
    with pytest.raises(ValueError):
        reference_log_likelihood(std_normal_spec, 500, seed=4)


def test_spec_json_round_trip(tmp_path, four_cluster_spec):
    path = tmp_path / "spec.json"
    save_spec_json(four_cluster_spec, path)
    loaded = load_spec_json(path)
    assert np.array_equal(loaded.weights, four_cluster_spec.weights)
    assert np.array_equal(loaded.means, four_cluster_spec.means)
    assert np.array_equal(loaded.covariances, four_cluster_spec.covariances)


def test_dataset_csv_round_trip(tmp_path, four_cluster_spec):
    ds = sample_gmm(four_cluster_spec, 50, seed=13)
    path = tmp_path / "data.csv"
    save_dataset_csv(ds, path)
    assert np.array_equal(load_dataset_csv(path).points, ds.points)


def test_dataset_rejects_non_finite():
    with pytest.raises(ValueError):
        Dataset(points=np.array([[1.0, np.nan]]))
