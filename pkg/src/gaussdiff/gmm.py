"""Gaussian mixture ground truth: sampling and exact log-density scoring.

The mixture plays two roles: it generates the synthetic training data, and
because its density is known in closed form it scores generated samples via
the average log-likelihood metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .rng import make_rng, standard_normal, uniform_open

__all__ = [
    "GmmSpec",
    "Dataset",
    "default_spec",
    "sample_gmm",
    "gmm_log_density",
    "gmm_log_densities",
    "average_log_likelihood",
    "reference_log_likelihood",
    "save_spec_json",
    "load_spec_json",
    "save_dataset_csv",
    "load_dataset_csv",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GmmSpec:
    """Mixture weights, means and covariances of the data distribution.

    Validation is strict: weights must form a probability vector and every
    covariance must be honestly positive definite (no jitter is applied).
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.float64)
        covariances = np.asarray(self.covariances, dtype=np.float64)
        if weights.ndim != 1 or means.ndim != 2 or covariances.ndim != 3:
            raise ValueError("expected weights[K], means[K,d], covariances[K,d,d]")
        k, d = means.shape
        if weights.shape != (k,) or covariances.shape != (k, d, d):
            raise ValueError("component counts/dimensions do not agree")
        if np.any(weights <= 0.0):
            raise ValueError("all mixture weights must be positive")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1 within 1e-12")
        if not (np.isfinite(means).all() and np.isfinite(covariances).all()):
            raise ValueError("means and covariances must be finite")
        chol = np.empty_like(covariances)
        for i, cov in enumerate(covariances):
            if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
                raise ValueError(f"covariance {i} is not symmetric")
            try:
                chol[i] = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ValueError(f"covariance {i} is not positive definite") from None
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covariances)
        object.__setattr__(self, "_chol", chol)

    @property
    def components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class Dataset:
    """A matrix of samples plus the seed that produced it."""

    points: np.ndarray
    seed: int = -1

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2:
            raise ValueError("dataset points must be a 2-D matrix")
        if not np.isfinite(points).all():
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def default_spec() -> GmmSpec:
    """Four well-separated unit-covariance clusters at (+-4, +-4).

    Unit within-cluster variance matches the scale of Gaussianized data, so
    baseline-vs-gaussianized training losses are comparable; the wide
    separation keeps the clustered-target regime.
    """
    means = np.array([[4.0, 4.0], [4.0, -4.0], [-4.0, 4.0], [-4.0, -4.0]])
    covs = np.tile(np.eye(2), (4, 1, 1))
    return GmmSpec(weights=np.full(4, 0.25), means=means, covariances=covs)


def sample_gmm(spec: GmmSpec, n: int, seed: int) -> Dataset:
    """Draw n mixture samples: component index by inverse-CDF on the weights,
    then mean + L z with L the component's Cholesky factor."""
    if n < 0:
        raise ValueError("n must be >= 0")
    d = spec.dim
    rng = make_rng(seed, "gmm-sample")
    u = uniform_open(rng, n)
    comps = np.searchsorted(np.cumsum(spec.weights), u)
    comps = np.minimum(comps, spec.components - 1)
    z = standard_normal(rng, (n, d))
    points = np.empty((n, d))
    for k in range(spec.components):
        rows = comps == k
        if rows.any():
            points[rows] = spec.means[k] + z[rows] @ spec._chol[k].T
    return Dataset(points=points, seed=seed)


def _component_log_densities(spec: GmmSpec, points: np.ndarray) -> np.ndarray:
    """log N(x | mu_k, Sigma_k) for every row and component, shape (n, K)."""
    n, d = points.shape
    out = np.empty((n, spec.components))
    for k in range(spec.components):
        diff = points - spec.means[k]
        y = solve_triangular(spec._chol[k], diff.T, lower=True)
        mahal = np.sum(y * y, axis=0)
        log_det = 2.0 * np.sum(np.log(np.diag(spec._chol[k])))
        out[:, k] = -0.5 * (d * _LOG_2PI + log_det + mahal)
    return out


def gmm_log_densities(spec: GmmSpec, points: np.ndarray) -> np.ndarray:
    """Exact mixture log-density of each row, log-sum-exp over components."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != spec.dim:
        raise ValueError(f"points must have shape (n, {spec.dim})")
    if not np.isfinite(points).all():
        raise ValueError("points contain non-finite entries")
    log_comp = _component_log_densities(spec, points)
    return logsumexp(log_comp + np.log(spec.weights), axis=1)


def gmm_log_density(spec: GmmSpec, x: np.ndarray) -> float:
    """Exact mixture log-density of a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.dim,):
        raise ValueError(f"x must have shape ({spec.dim},)")
    return float(gmm_log_densities(spec, x[None, :])[0])


def average_log_likelihood(spec: GmmSpec, samples) -> float:
    """Mean mixture log-density over the rows of a dataset or matrix."""
    points = samples.points if isinstance(samples, Dataset) else np.asarray(samples)
    if points.shape[0] == 0:
        raise ValueError("average log-likelihood of an empty dataset is undefined")
    return float(np.mean(gmm_log_densities(spec, points)))


def reference_log_likelihood(spec: GmmSpec, n: int, seed: int) -> float:
    """Average log-likelihood of fresh true samples; the upper-anchor value
    that generated samples are compared against."""
    if n < 1000:
        raise ValueError("reference requires n >= 1000 samples")
    return average_log_likelihood(spec, sample_gmm(spec, n, seed))


def save_spec_json(spec: GmmSpec, path) -> None:
    payload = {
        "weights": spec.weights.tolist(),
        "means": spec.means.tolist(),
        "covariances": spec.covariances.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_spec_json(path) -> GmmSpec:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return GmmSpec(
            weights=np.asarray(payload["weights"], dtype=np.float64),
            means=np.asarray(payload["means"], dtype=np.float64),
            covariances=np.asarray(payload["covariances"], dtype=np.float64),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing GMM spec field {exc}") from None


def save_dataset_csv(points, path) -> None:
    """Headerless CSV, one sample per row, full round-trip float precision."""
    points = points.points if isinstance(points, Dataset) else np.asarray(points)
    with open(path, "w", encoding="utf-8") as fh:
        for row in points:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_dataset_csv(path) -> Dataset:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    points = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, 0))
    return Dataset(points=points)
