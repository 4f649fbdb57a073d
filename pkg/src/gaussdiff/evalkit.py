"""Metrics and curve extraction for scoring generated samples.

Provides the average-log-likelihood-vs-reverse-step curve, a one-sample
Kolmogorov-Smirnov statistic against the standard normal, and the maximum
absolute off-diagonal correlation used as an independence diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .gmm import GmmSpec, average_log_likelihood, reference_log_likelihood

__all__ = ["LlCurve", "ll_vs_step", "ks_statistic", "max_abs_offdiag_corr"]

REFERENCE_SAMPLES_DEFAULT = 100_000


@dataclass(frozen=True)
class LlCurve:
    """Average log-likelihood at each recorded reverse step.

    Step s counts denoising steps taken, so s=0 is the initial Gaussian and
    s=T the final sample.  ``reference`` is the average log-likelihood of
    fresh true samples (the red dashed line in the report plots).
    """

    steps: np.ndarray
    values: np.ndarray
    reference: float
    pipeline: str
    width: int

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if steps.shape != values.shape or steps.ndim != 1:
            raise ValueError("steps and values must be equal-length vectors")
        if np.any(np.diff(steps) <= 0):
            raise ValueError("steps must be strictly increasing")
        if not np.isfinite(values).all():
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "values", values)


def ll_vs_step(spec: GmmSpec, snapshots: dict, inverse_map=None, *,
               pipeline: str = "baseline", width: int = 0,
               reference: float | None = None, reference_seed: int = 0) -> LlCurve:
    """Score the sampler's snapshots against the true mixture density.

    ``snapshots`` maps reverse-step index to a sample matrix.  When an
    ``inverse_map`` stack is given, each snapshot is mapped back to data
    space before scoring; the gaussianized pipeline requires one.
    """
    if pipeline not in ("baseline", "gaussianized"):
        raise ValueError("pipeline must be 'baseline' or 'gaussianized'")
    if pipeline == "gaussianized" and inverse_map is None:
        raise ValueError("gaussianized pipeline requires an inverse Gaussianization stack")
    if reference is None:
        reference = reference_log_likelihood(spec, REFERENCE_SAMPLES_DEFAULT, reference_seed)
    from .gaussianizer import gaussianizer_inverse  # local import breaks the module cycle

    steps = sorted(snapshots)
    values = []
    for s in steps:
        points = np.asarray(snapshots[s], dtype=np.float64)
        if inverse_map is not None:
            points = gaussianizer_inverse(inverse_map, points)
        values.append(average_log_likelihood(spec, points))
    return LlCurve(steps=np.asarray(steps), values=np.asarray(values),
                   reference=float(reference), pipeline=pipeline, width=width)


def ks_statistic(samples: np.ndarray) -> float:
    """Sup-norm distance between the empirical CDF and the standard normal CDF."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    n = samples.size
    if n < 10:
        raise ValueError("ks_statistic needs at least 10 samples")
    ordered = np.sort(samples)
    cdf = ndtr(ordered)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def max_abs_offdiag_corr(data) -> float:
    """Largest absolute off-diagonal entry of the sample correlation matrix."""
    points = np.asarray(getattr(data, "points", data), dtype=np.float64)
    n, d = points.shape
    if n < 10 or d < 2:
        raise ValueError("need at least 10 rows and 2 columns")
    if np.any(np.std(points, axis=0) == 0.0):
        raise ValueError("zero-variance column has undefined correlation")
    corr = np.corrcoef(points, rowvar=False)
    off = np.abs(corr - np.diag(np.diag(corr)))
    return float(off.max())
