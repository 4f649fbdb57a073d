"""One-dimensional Gaussianization of a single component.

The chain is: kernel density estimate -> numeric CDF on a grid -> probability
integral transform -> inverse standard-normal CDF.  The CDF is stored as a
piecewise-linear interpolant over a fixed grid, which makes the inverse exact
(binary search plus linear inversion) instead of requiring per-query
integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "MarginalMap",
    "kde_pdf",
    "silverman_bandwidth",
    "fit_marginal",
    "marginal_cdf",
    "marginal_inverse_cdf",
    "std_normal_cdf",
    "std_normal_inverse_cdf",
    "gaussianize_1d",
    "degaussianize_1d",
]

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class MarginalMap:
    """Grid-based CDF of one component with its clamping bounds.

    ``cdf_values`` runs from exactly 0 to exactly 1 over ``grid``; evaluation
    clamps into [clamp_lo, clamp_hi] so the subsequent inverse-normal map
    stays finite at the sample extremes.
    """

    grid: np.ndarray
    cdf_values: np.ndarray
    bandwidth: float
    clamp_lo: float
    clamp_hi: float

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        cdf = np.asarray(self.cdf_values, dtype=np.float64)
        if grid.ndim != 1 or grid.shape != cdf.shape or grid.size < 2:
            raise ValueError("grid and cdf_values must be equal-length vectors")
        if not (np.isfinite(grid).all() and np.isfinite(cdf).all()):
            raise ValueError("grid and cdf_values must be finite")
        if np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        if np.any(np.diff(cdf) < 0.0):
            raise ValueError("cdf_values must be non-decreasing")
        if not (cdf[0] < 1e-4 and cdf[-1] > 1.0 - 1e-4):
            raise ValueError("cdf_values must span [~0, ~1]")
        if not self.bandwidth > 0.0:
            raise ValueError("bandwidth must be positive")
        if not 0.0 < self.clamp_lo < self.clamp_hi < 1.0:
            raise ValueError("clamp bounds must satisfy 0 < lo < hi < 1")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cdf_values", cdf)


def kde_pdf(samples: np.ndarray, h: float, z):
    """Gaussian-kernel density estimate (1/nh) sum K((z - z_j)/h).

    ``z`` may be a scalar or an array; evaluation is chunked so large grids
    against large sample sets stay within memory.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size < 2:
        raise ValueError("kde_pdf needs at least 2 samples")
    if not h > 0.0:
        raise ValueError("bandwidth h must be positive")
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64))
    out = np.empty(z_arr.shape[0])
    chunk = max(1, 2_000_000 // samples.size)
    for lo in range(0, z_arr.shape[0], chunk):
        block = z_arr[lo : lo + chunk]
        u = (block[:, None] - samples[None, :]) / h
        out[lo : lo + chunk] = np.exp(-0.5 * u * u).sum(axis=1)
    out /= samples.size * h * _SQRT_2PI
    return out if np.ndim(z) else float(out[0])


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 1.06 * sigma * n^(-1/5)."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    sigma = float(np.std(samples, ddof=1))
    return 1.06 * sigma * samples.size ** (-0.2)


def fit_marginal(samples: np.ndarray, bandwidth: float | None = None,
                 grid_size: int = 1024) -> MarginalMap:
    """Fit the grid CDF of one component.

    The grid spans the sample range padded by 4 bandwidths on each side; the
    CDF is the trapezoidal integral of the KDE, normalized to end at exactly
    1.  Clamp bounds are (1/(n+1), n/(n+1)).
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    n = samples.size
    if n < 10:
        raise ValueError("fit_marginal needs at least 10 samples")
    if not np.isfinite(samples).all():
        raise ValueError("samples must be finite")
    if np.ptp(samples) == 0.0:
        raise ValueError("zero-variance component: all samples identical")
    h = silverman_bandwidth(samples) if bandwidth is None else float(bandwidth)
    if not h > 0.0:
        raise ValueError("bandwidth must be positive")
    grid = np.linspace(samples.min() - 4.0 * h, samples.max() + 4.0 * h, grid_size)
    pdf = kde_pdf(samples, h, grid)
    dx = grid[1] - grid[0]
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * dx)))
    cdf /= cdf[-1]
    return MarginalMap(
        grid=grid,
        cdf_values=cdf,
        bandwidth=h,
        clamp_lo=1.0 / (n + 1),
        clamp_hi=n / (n + 1.0),
    )


def marginal_cdf(m: MarginalMap, z):
    """Piecewise-linear CDF evaluation, clamped into [clamp_lo, clamp_hi]."""
    z_arr = np.asarray(z, dtype=np.float64)
    if not np.isfinite(z_arr).all():
        raise ValueError("z must be finite")
    u = np.interp(z_arr, m.grid, m.cdf_values)
    u = np.clip(u, m.clamp_lo, m.clamp_hi)
    return u if np.ndim(z) else float(u)


def marginal_inverse_cdf(m: MarginalMap, u):
    """Exact inverse of the piecewise-linear CDF.

    ``u`` outside [clamp_lo, clamp_hi] is clamped first, mirroring the
    forward clamp; ``u`` outside (0, 1) is an error.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0) or not np.isfinite(u_arr).all():
        raise ValueError("u must lie strictly inside (0, 1)")
    return _invert_clamped(m, np.clip(u_arr, m.clamp_lo, m.clamp_hi), np.ndim(u))


def _invert_clamped(m: MarginalMap, uc: np.ndarray, ndim: int):
    # cdf[0] = 0 < clamp_lo and cdf[-1] = 1 > clamp_hi keep the bracketing
    # index interior, and side="left" guarantees cdf[idx-1] < uc <= cdf[idx],
    # so the segment width is strictly positive even across flat runs.
    uc = np.atleast_1d(uc)
    idx = np.searchsorted(m.cdf_values, uc, side="left")
    lo, hi = m.grid[idx - 1], m.grid[idx]
    t = (uc - m.cdf_values[idx - 1]) / (m.cdf_values[idx] - m.cdf_values[idx - 1])
    z = lo + t * (hi - lo)
    return z if ndim else float(z[0])


def std_normal_cdf(z):
    """Standard-normal CDF, erf-based, accurate to double precision."""
    z_arr = np.asarray(z, dtype=np.float64)
    if not np.isfinite(z_arr).all():
        raise ValueError("z must be finite")
    out = ndtr(z_arr)
    return out if np.ndim(z) else float(out)


def std_normal_inverse_cdf(u):
    """Standard-normal quantile function on (0, 1)."""
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0) or not np.isfinite(u_arr).all():
        raise ValueError("u must lie strictly inside (0, 1)")
    out = ndtri(u_arr)
    return out if np.ndim(u) else float(out)


def gaussianize_1d(m: MarginalMap, z):
    """Map a component value to its Gaussianized image G^-1(F(z))."""
    return std_normal_inverse_cdf(marginal_cdf(m, z))


def degaussianize_1d(m: MarginalMap, y):
    """Inverse map F^-1(G(y)); out-of-range y clamps to the fitted range
    rather than extrapolating."""
    y_arr = np.asarray(y, dtype=np.float64)
    if not np.isfinite(y_arr).all():
        raise ValueError("y must be finite")
    u = np.clip(ndtr(y_arr), m.clamp_lo, m.clamp_hi)
    return _invert_clamped(m, u, np.ndim(y))
