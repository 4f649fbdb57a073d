"""Invertible linear ICA layer: center -> whiten -> rotate.

The rotation is found by the FastICA fixed-point iteration with symmetric
decorrelation, so it stays orthonormal in whitened space and the composite
map has an exact closed-form inverse.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .gmm import Dataset
from .rng import make_rng, standard_normal

__all__ = ["IcaModel", "IcaConfig", "fit_ica", "ica_forward", "ica_inverse"]


@dataclass(frozen=True)
class IcaModel:
    """Fitted ICA layer; all matrices are d x d and finite.

    ``whiten`` maps centered data to unit covariance, ``dewhiten`` is its
    exact inverse, and ``rotation`` is orthonormal in whitened space.
    """

    center: np.ndarray
    whiten: np.ndarray
    dewhiten: np.ndarray
    rotation: np.ndarray
    converged: bool = True

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        whiten = np.asarray(self.whiten, dtype=np.float64)
        dewhiten = np.asarray(self.dewhiten, dtype=np.float64)
        rotation = np.asarray(self.rotation, dtype=np.float64)
        d = center.shape[0]
        for name, mat in (("whiten", whiten), ("dewhiten", dewhiten), ("rotation", rotation)):
            if mat.shape != (d, d):
                raise ValueError(f"{name} must be {d}x{d}")
            if not np.isfinite(mat).all():
                raise ValueError(f"{name} contains non-finite entries")
        eye = np.eye(d)
        if np.max(np.abs(rotation @ rotation.T - eye)) > 1e-8:
            raise ValueError("rotation is not orthonormal within 1e-8")
        if np.max(np.abs(whiten @ dewhiten - eye)) > 1e-8:
            raise ValueError("dewhiten is not the inverse of whiten within 1e-8")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "whiten", whiten)
        object.__setattr__(self, "dewhiten", dewhiten)
        object.__setattr__(self, "rotation", rotation)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class IcaConfig:
    max_iterations: int = 200
    tolerance: float = 1e-6
    nonlinearity: str = "logcosh"
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if self.nonlinearity not in ("logcosh", "cube"):
            raise ValueError("nonlinearity must be 'logcosh' or 'cube'")


def _contrast(y: np.ndarray, kind: str):
    if kind == "logcosh":
        g = np.tanh(y)
        return g, 1.0 - g * g
    return y ** 3, 3.0 * y * y


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    """W <- (W W^T)^(-1/2) W, re-orthonormalizing all rows at once."""
    vals, vecs = np.linalg.eigh(w @ w.T)
    return (vecs * (1.0 / np.sqrt(vals))) @ vecs.T @ w


def _fix_signs(w: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    signs = np.sign(w[np.arange(w.shape[0]), np.argmax(np.abs(w), axis=1)])
    signs[signs == 0.0] = 1.0
    return w * signs[:, None]


def fit_ica(data, config: IcaConfig = IcaConfig()) -> IcaModel:
    """Fit one ICA layer on the rows of ``data``.

    Whitening comes from the eigendecomposition of the sample covariance;
    the rotation from FastICA fixed-point iterations run to ``tolerance`` or
    ``max_iterations``.  Non-convergence returns the best iterate with
    ``converged=False`` instead of raising: later Gaussianization layers
    compensate for an imperfect rotation.
    """
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n, d = points.shape
    if n < 10 * d:
        raise ValueError(f"fit_ica needs at least {10 * d} samples for dimension {d}")
    center = points.mean(axis=0)
    centered = points - center
    cov = centered.T @ centered / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    if vals[-1] <= 0.0 or vals[0] < 1e-10 * vals[-1]:
        raise ValueError("sample covariance is rank-deficient")
    whiten = (vecs / np.sqrt(vals)).T
    dewhiten = vecs * np.sqrt(vals)
    whitened = centered @ whiten.T

    rng = make_rng(config.seed, "ica-init")
    w = _sym_decorrelate(standard_normal(rng, (d, d)))
    best_w, best_lim = w, np.inf
    converged = False
    for _ in range(config.max_iterations):
        y = whitened @ w.T
        g, g_prime = _contrast(y, config.nonlinearity)
        w_new = _sym_decorrelate(g.T @ whitened / n - g_prime.mean(axis=0)[:, None] * w)
        lim = float(np.max(np.abs(np.abs(np.sum(w_new * w, axis=1)) - 1.0)))
        w = w_new
        if lim < best_lim:
            best_w, best_lim = w, lim
        if lim < config.tolerance:
            converged = True
            break
    if not converged:
        warnings.warn("FastICA did not converge; returning the best iterate", RuntimeWarning)
    return IcaModel(
        center=center,
        whiten=whiten,
        dewhiten=dewhiten,
        rotation=_fix_signs(best_w),
        converged=converged,
    )


def _rows_times(points: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    # Fixed-order contraction instead of BLAS matmul: BLAS picks kernels by
    # batch shape, so results could differ by 1 ulp between a batch and its
    # individual rows, breaking the bitwise row-purity contract.
    return (points[:, :, None] * matrix[None, :, :]).sum(axis=1)


def _apply(points: np.ndarray, model: IcaModel, forward: bool) -> np.ndarray:
    if points.ndim != 2 or points.shape[1] != model.dim:
        raise ValueError(f"data must have shape (n, {model.dim})")
    if forward:
        return _rows_times(points - model.center, (model.rotation @ model.whiten).T)
    return _rows_times(points, model.rotation @ model.dewhiten.T) + model.center


def ica_forward(model: IcaModel, data):
    """Map data rows to independent components: rotation @ whiten @ (x - center)."""
    if isinstance(data, Dataset):
        return Dataset(points=_apply(data.points, model, True), seed=data.seed)
    return _apply(np.asarray(data, dtype=np.float64), model, True)


def ica_inverse(model: IcaModel, comps):
    """Exact inverse map: dewhiten @ rotation^T @ z + center."""
    if isinstance(comps, Dataset):
        return Dataset(points=_apply(comps.points, model, False), seed=comps.seed)
    return _apply(np.asarray(comps, dtype=np.float64), model, False)
