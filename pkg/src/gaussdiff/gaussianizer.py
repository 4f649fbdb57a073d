"""The iterative Gaussianization stack.

Each layer applies an ICA map followed by per-component one-dimensional
Gaussianization; stacking layers progressively removes correlations and
non-Gaussian structure.  The inverse replays the layers in reverse order, so
the whole transform is an invertible preprocessing map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .evalkit import ks_statistic, max_abs_offdiag_corr
from .gmm import Dataset
from .ica import IcaConfig, IcaModel, fit_ica, ica_forward, ica_inverse
from .marginal import MarginalMap, degaussianize_1d, fit_marginal, gaussianize_1d
from .rng import derive_int_seed

__all__ = [
    "MarginalConfig",
    "LayerDiagnostics",
    "GaussianizerStack",
    "fit_gaussianizer",
    "gaussianizer_forward",
    "gaussianizer_inverse",
    "save_stack",
    "load_stack",
]


@dataclass(frozen=True)
class MarginalConfig:
    bandwidth: float | None = None  # None selects Silverman's rule per component
    grid_size: int = 1024

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.bandwidth is not None and not self.bandwidth > 0.0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class LayerDiagnostics:
    """Per-layer fit diagnostics on the transformed training batch."""

    ks: tuple
    max_abs_offdiag_corr: float

    @property
    def max_ks(self) -> float:
        return max(self.ks)


@dataclass(frozen=True)
class GaussianizerStack:
    """Ordered (IcaModel, per-dimension MarginalMap) layers with diagnostics.

    An empty stack is a valid identity transform; fitting always produces at
    least one layer.
    """

    layers: tuple
    dim: int
    fit_diagnostics: tuple

    def __post_init__(self):
        layers = tuple((ica, tuple(maps)) for ica, maps in self.layers)
        for idx, (ica, maps) in enumerate(layers):
            if ica.dim != self.dim or len(maps) != self.dim:
                raise ValueError(f"layer {idx + 1} does not match stack dimension {self.dim}")
        diags = tuple(self.fit_diagnostics)
        if len(diags) != len(layers):
            raise ValueError("need one diagnostics record per layer")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "fit_diagnostics", diags)

    @property
    def iterations(self) -> int:
        return len(self.layers)


def fit_gaussianizer(data, iterations: int, ica_config: IcaConfig = IcaConfig(),
                     marginal_config: MarginalConfig = MarginalConfig()):
    """Fit ``iterations`` Gaussianization layers on ``data``.

    Each round fits ICA on the current representation, Gaussianizes every
    component of the ICA output, and feeds the result to the next round.
    Returns the stack together with the final transformed dataset; the
    latter is bitwise identical to ``gaussianizer_forward`` on the
    training data.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    seed = data.seed if isinstance(data, Dataset) else -1
    current = np.asarray(data.points if isinstance(data, Dataset) else data, dtype=np.float64)
    layers = []
    diagnostics = []
    for k in range(1, iterations + 1):
        layer_cfg = replace(ica_config, seed=derive_int_seed(ica_config.seed, "gaussianize-layer", k))
        try:
            ica = fit_ica(current, layer_cfg)
            comps = ica_forward(ica, current)
            maps = [
                fit_marginal(comps[:, i], marginal_config.bandwidth, marginal_config.grid_size)
                for i in range(comps.shape[1])
            ]
        except ValueError as exc:
            raise ValueError(f"gaussianization layer {k}: {exc}") from exc
        current = np.column_stack([gaussianize_1d(m, comps[:, i]) for i, m in enumerate(maps)])
        layers.append((ica, tuple(maps)))
        diagnostics.append(LayerDiagnostics(
            ks=tuple(ks_statistic(current[:, i]) for i in range(current.shape[1])),
            max_abs_offdiag_corr=max_abs_offdiag_corr(current),
        ))
    stack = GaussianizerStack(layers=tuple(layers), dim=current.shape[1],
                              fit_diagnostics=tuple(diagnostics))
    return stack, Dataset(points=current, seed=seed)


def _check_dim(stack: GaussianizerStack, points: np.ndarray) -> None:
    if points.ndim != 2 or points.shape[1] != stack.dim:
        raise ValueError(f"data must have shape (n, {stack.dim})")


def gaussianizer_forward(stack: GaussianizerStack, data):
    """Apply every layer in fit order: ICA, then per-dimension Gaussianization."""
    points = np.asarray(data.points if isinstance(data, Dataset) else data, dtype=np.float64)
    _check_dim(stack, points)
    for ica, maps in stack.layers:
        points = ica_forward(ica, points)
        points = np.column_stack([gaussianize_1d(m, points[:, i]) for i, m in enumerate(maps)])
    if isinstance(data, Dataset):
        return Dataset(points=points, seed=data.seed)
    return points


def gaussianizer_inverse(stack: GaussianizerStack, data):
    """Undo the layers last-to-first: per-dimension inverse, then inverse ICA.

    Entries beyond the representable Gaussianized range clamp to the fitted
    range instead of extrapolating.
    """
    points = np.asarray(data.points if isinstance(data, Dataset) else data, dtype=np.float64)
    _check_dim(stack, points)
    for ica, maps in reversed(stack.layers):
        points = np.column_stack([degaussianize_1d(m, points[:, i]) for i, m in enumerate(maps)])
        points = ica_inverse(ica, points)
    if isinstance(data, Dataset):
        return Dataset(points=points, seed=data.seed)
    return points


def _ica_to_json(ica: IcaModel) -> dict:
    return {
        "center": ica.center.tolist(),
        "whiten": ica.whiten.tolist(),
        "dewhiten": ica.dewhiten.tolist(),
        "rotation": ica.rotation.tolist(),
        "converged": bool(ica.converged),
    }


def _marginal_to_json(m: MarginalMap) -> dict:
    return {
        "grid": m.grid.tolist(),
        "cdf": m.cdf_values.tolist(),
        "bandwidth": m.bandwidth,
        "clamp": [m.clamp_lo, m.clamp_hi],
    }


def save_stack(stack: GaussianizerStack, path) -> None:
    payload = {
        "dim": stack.dim,
        "iterations": stack.iterations,
        "layers": [
            {"ica": _ica_to_json(ica), "marginals": [_marginal_to_json(m) for m in maps]}
            for ica, maps in stack.layers
        ],
        "diagnostics": {
            "per_layer": [
                {"ks": list(d.ks), "max_abs_offdiag_corr": d.max_abs_offdiag_corr}
                for d in stack.fit_diagnostics
            ]
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_stack(path) -> GaussianizerStack:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed stack JSON: {exc}") from None
    try:
        dim = int(payload["dim"])
        layers = []
        for idx, layer in enumerate(payload["layers"]):
            ica = IcaModel(
                center=np.asarray(layer["ica"]["center"], dtype=np.float64),
                whiten=np.asarray(layer["ica"]["whiten"], dtype=np.float64),
                dewhiten=np.asarray(layer["ica"]["dewhiten"], dtype=np.float64),
                rotation=np.asarray(layer["ica"]["rotation"], dtype=np.float64),
                converged=bool(layer["ica"].get("converged", True)),
            )
            maps = tuple(
                MarginalMap(
                    grid=np.asarray(m["grid"], dtype=np.float64),
                    cdf_values=np.asarray(m["cdf"], dtype=np.float64),
                    bandwidth=float(m["bandwidth"]),
                    clamp_lo=float(m["clamp"][0]),
                    clamp_hi=float(m["clamp"][1]),
                )
                for m in layer["marginals"]
            )
            layers.append((ica, maps))
        diagnostics = tuple(
            LayerDiagnostics(ks=tuple(d["ks"]), max_abs_offdiag_corr=float(d["max_abs_offdiag_corr"]))
            for d in payload["diagnostics"]["per_layer"]
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"{path}: malformed stack JSON: missing or bad field ({exc!r})") from None
    try:
        return GaussianizerStack(layers=tuple(layers), dim=dim, fit_diagnostics=diagnostics)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
