"""Experiment configuration: defaults, JSON loading, flag overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .ddpm import resolve_widths
from .gmm import GmmSpec, default_spec, load_spec_json

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "restrict"]

PIPELINES = ("baseline", "gaussianized")


class ConfigError(ValueError):
    """Invalid configuration or command-line input (CLI exit code 1)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one full experiment from a seed."""

    gmm: GmmSpec = field(default_factory=default_spec)
    widths: tuple = (16, 32, 64, 128)
    pipelines: tuple = PIPELINES
    n_train: int = 20_000
    n_heldout: int = 2_000
    gaussianize_iterations: int = 5
    diffusion_steps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.1
    train_iterations: int = 20_000
    batch_size: int = 128
    learning_rate: float = 1e-3
    ica_max_iterations: int = 200
    ica_tolerance: float = 1e-6
    ica_nonlinearity: str = "logcosh"
    kde_bandwidth: float | None = None
    kde_grid_size: int = 1024
    snapshot_steps: tuple = None
    snapshot_samples: int = 2_000
    reference_samples: int = 100_000
    seed: int = 0
    out_dir: str = "runs/default"
    jobs: int = 0  # 0 = one worker per (pipeline, width) job, capped at 4

    def __post_init__(self):
        if self.snapshot_steps is None:
            object.__setattr__(self, "snapshot_steps",
                               tuple(range(0, self.diffusion_steps + 1, 10)))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "pipelines", tuple(self.pipelines))
        object.__setattr__(self, "snapshot_steps",
                           tuple(int(s) for s in self.snapshot_steps))
        if not self.widths or not self.pipelines:
            raise ConfigError("need at least one width and one pipeline")
        for w in self.widths:
            try:
                resolve_widths(w)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for p in self.pipelines:
            if p not in PIPELINES:
                raise ConfigError(f"unknown pipeline {p!r}; choose from {PIPELINES}")
        if any(s < 0 or s > self.diffusion_steps for s in self.snapshot_steps):
            raise ConfigError("snapshot_steps must lie in 0..diffusion_steps")
        if self.n_train < 1 or self.n_heldout < 0:
            raise ConfigError("n_train must be >= 1 and n_heldout >= 0")


def _coerce(cfg_field, value):
    if cfg_field.name == "gmm":
        return value if isinstance(value, GmmSpec) else GmmSpec(
            weights=np.asarray(value["weights"], dtype=np.float64),
            means=np.asarray(value["means"], dtype=np.float64),
            covariances=np.asarray(value["covariances"], dtype=np.float64),
        )
    if cfg_field.name in ("widths", "pipelines", "snapshot_steps"):
        return tuple(value)
    return value


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Build a config from an optional JSON file plus keyword overrides.

    The JSON keys mirror the dataclass fields; ``gmm`` may be given inline
    (weights/means/covariances) or via ``gmm_path``.  Overrides win over the
    file, which wins over defaults.
    """
    raw = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed config JSON: {exc}") from None
    if "gmm_path" in raw:
        raw["gmm"] = load_spec_json(raw.pop("gmm_path"))
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name: f for f in fields(ExperimentConfig) if f.init}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        kwargs = {k: _coerce(known[k], v) for k, v in raw.items()}
        return ExperimentConfig(**kwargs)
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from None


def restrict(cfg: ExperimentConfig, width=None, pipeline=None) -> ExperimentConfig:
    """Narrow a config to one width and/or pipeline (CLI flag overrides)."""
    if width is not None:
        cfg = replace(cfg, widths=(int(width),))
    if pipeline is not None:
        if pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {pipeline!r}")
        cfg = replace(cfg, pipelines=(pipeline,))
    return cfg
