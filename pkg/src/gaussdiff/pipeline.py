"""Experiment orchestration: the operations behind each CLI subcommand.

Every operation is a pure function of (config, seed) and the files already
in the output directory, so reruns with the same config reproduce identical
bytes and the subcommands can be chained or executed independently.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import report
from .config import ExperimentConfig
from .ddpm import (
    TrainConfig, init_eps_net, load_model, make_schedule, sample, save_model, train,
)
from .evalkit import ll_vs_step
from .gaussianizer import (
    MarginalConfig, fit_gaussianizer, gaussianizer_forward, gaussianizer_inverse,
    load_stack, save_stack,
)
from .gmm import (
    load_dataset_csv, load_spec_json, reference_log_likelihood, sample_gmm,
    save_dataset_csv, save_spec_json,
)
from .ica import IcaConfig
from .rng import derive_int_seed

__all__ = [
    "MissingArtifactError",
    "cmd_gen_data",
    "cmd_fit_transform",
    "cmd_train",
    "cmd_sample_eval",
    "cmd_report",
    "cmd_run_all",
]


class MissingArtifactError(FileNotFoundError):
    """A required input file from an earlier stage is absent."""


def _path(cfg: ExperimentConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _require(cfg: ExperimentConfig, name: str, produced_by: str) -> str:
    path = _path(cfg, name)
    if not os.path.exists(path):
        raise MissingArtifactError(f"missing {path}; run '{produced_by}' first")
    return path


def model_name(pipeline: str, width: int) -> str:
    return f"model_{pipeline}_w{width}.json"


def loss_name(pipeline: str, width: int) -> str:
    return f"loss_{pipeline}_w{width}.csv"


def llcurve_name(pipeline: str, width: int) -> str:
    return f"llcurve_{pipeline}_w{width}.csv"


def snapshot_name(pipeline: str, width: int, step: int) -> str:
    return f"snapshots_{pipeline}_w{width}_s{step:03d}.csv"


def cmd_gen_data(cfg: ExperimentConfig) -> None:
    """Write the mixture spec plus train and held-out CSVs.

    Train and held-out sets use disjoint derived seed streams, so they never
    share draws.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    save_spec_json(cfg.gmm, _path(cfg, "spec.json"))
    train_set = sample_gmm(cfg.gmm, cfg.n_train, derive_int_seed(cfg.seed, "data", "train"))
    heldout = sample_gmm(cfg.gmm, cfg.n_heldout, derive_int_seed(cfg.seed, "data", "heldout"))
    save_dataset_csv(train_set, _path(cfg, "train.csv"))
    save_dataset_csv(heldout, _path(cfg, "heldout.csv"))


def cmd_fit_transform(cfg: ExperimentConfig) -> None:
    """Fit the Gaussianization stack on the training data.

    Writes the stack JSON, the transformed training CSV, and a diagnostics
    JSON holding per-layer normality/independence statistics plus the
    held-out round-trip reconstruction error.
    """
    train_path = _require(cfg, "train.csv", "gen-data")
    data = load_dataset_csv(train_path)
    ica_cfg = IcaConfig(
        max_iterations=cfg.ica_max_iterations,
        tolerance=cfg.ica_tolerance,
        nonlinearity=cfg.ica_nonlinearity,
        seed=derive_int_seed(cfg.seed, "gaussianize"),
    )
    marginal_cfg = MarginalConfig(bandwidth=cfg.kde_bandwidth, grid_size=cfg.kde_grid_size)
    stack, transformed = fit_gaussianizer(data, cfg.gaussianize_iterations, ica_cfg, marginal_cfg)
    save_stack(stack, _path(cfg, "stack.json"))
    save_dataset_csv(transformed, _path(cfg, "train_gaussianized.csv"))

    diagnostics = {
        "per_layer": [
            {"ks": list(d.ks), "max_abs_offdiag_corr": d.max_abs_offdiag_corr}
            for d in stack.fit_diagnostics
        ]
    }
    heldout_path = _path(cfg, "heldout.csv")
    if os.path.exists(heldout_path):
        heldout = load_dataset_csv(heldout_path).points
        central = _central_mask(data.points, heldout)
        if central.any():
            probe = heldout[central]
            recon = gaussianizer_inverse(stack, gaussianizer_forward(stack, probe))
            err = recon - probe
            variances = np.var(data.points, axis=0)
            diagnostics["round_trip"] = {
                "n_probe": int(probe.shape[0]),
                "max_abs_error": float(np.max(np.abs(err))),
                "mse_over_variance": float(np.max(np.mean(err * err, axis=0) / variances)),
            }
    with open(_path(cfg, "transform_diagnostics.json"), "w", encoding="utf-8") as fh:
        json.dump(diagnostics, fh, indent=2)
        fh.write("\n")


def _central_mask(train_points: np.ndarray, points: np.ndarray, coverage: float = 0.99) -> np.ndarray:
    """Rows whose every coordinate lies within the central ``coverage``
    quantile band of the training data."""
    tail = (1.0 - coverage) / 2.0
    lo = np.quantile(train_points, tail, axis=0)
    hi = np.quantile(train_points, 1.0 - tail, axis=0)
    return np.all((points >= lo) & (points <= hi), axis=1)


def _train_config(cfg: ExperimentConfig, pipeline: str, width: int) -> TrainConfig:
    return TrainConfig(
        iterations=cfg.train_iterations,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        seed=derive_int_seed(cfg.seed, "train", pipeline, width),
    )


def cmd_train(cfg: ExperimentConfig, pipeline: str, width: int) -> None:
    """Train one noise predictor on the pipeline's dataset and write the
    model JSON plus the per-iteration loss CSV."""
    if pipeline == "gaussianized":
        data_path = _require(cfg, "train_gaussianized.csv", "fit-transform")
    else:
        data_path = _require(cfg, "train.csv", "gen-data")
    data = load_dataset_csv(data_path)
    sched = make_schedule(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end)
    params = init_eps_net(data.dim, width, seed=derive_int_seed(cfg.seed, "init", pipeline, width))
    params, losses = train(params, data, sched, _train_config(cfg, pipeline, width))
    save_model(params, sched, _path(cfg, model_name(pipeline, width)))
    with open(_path(cfg, loss_name(pipeline, width)), "w", encoding="utf-8") as fh:
        fh.write("iteration,loss\n")
        for i, loss in enumerate(losses, start=1):
            fh.write(f"{i},{float(loss)!r}\n")


def cmd_sample_eval(cfg: ExperimentConfig, pipeline: str, width: int) -> None:
    """Generate snapshot samples along the reverse process and score them.

    Snapshot CSVs hold data-space points (the gaussianized pipeline's
    samples are mapped back through the inverse transform); the log-likelihood
    curve CSV lists one row per recorded reverse step.
    """
    spec = load_spec_json(_require(cfg, "spec.json", "gen-data"))
    params, sched = load_model(_require(cfg, model_name(pipeline, width), "train"))
    stack = None
    if pipeline == "gaussianized":
        stack = load_stack(_require(cfg, "stack.json", "fit-transform"))
    snapshots = sample(params, sched, cfg.snapshot_samples,
                       derive_int_seed(cfg.seed, "sample", pipeline, width),
                       record_at=cfg.snapshot_steps)
    reference = reference_log_likelihood(spec, cfg.reference_samples,
                                         derive_int_seed(cfg.seed, "reference"))
    curve = ll_vs_step(spec, snapshots, stack, pipeline=pipeline, width=width,
                       reference=reference)
    for step, points in snapshots.items():
        if stack is not None:
            points = gaussianizer_inverse(stack, points)
        save_dataset_csv(points, _path(cfg, snapshot_name(pipeline, width, step)))
    with open(_path(cfg, llcurve_name(pipeline, width)), "w", encoding="utf-8") as fh:
        fh.write("step,ll,reference,pipeline,width\n")
        for step, value in zip(curve.steps, curve.values):
            fh.write(f"{int(step)},{float(value)!r},{float(curve.reference)!r},{pipeline},{width}\n")


def _read_llcurve(path: str) -> dict:
    steps, values, reference = [], [], None
    with open(path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            step, ll, ref, _pipeline, _width = line.strip().split(",")
            steps.append(int(step))
            values.append(float(ll))
            reference = float(ref)
    return {"steps": steps, "values": values, "reference": reference}


def _read_loss(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        next(fh)
        return np.asarray([float(line.strip().split(",")[1]) for line in fh])


def cmd_report(cfg: ExperimentConfig) -> None:
    """Render the SVG figures and write the machine-readable summary.

    Produces one scatter-grid SVG per (pipeline, width), a log-likelihood
    figure and a loss figure per pipeline, and summary.json with the metrics
    the figures are drawn from.
    """
    train_points = load_dataset_csv(_require(cfg, "train.csv", "gen-data")).points
    summary = {
        "seed": cfg.seed,
        "widths": list(cfg.widths),
        "pipelines": list(cfg.pipelines),
        "diffusion_steps": cfg.diffusion_steps,
        "snapshot_steps": list(cfg.snapshot_steps),
        "reference_ll": None,
        "ll_curves": {},
        "final_window_mean_loss": {},
    }
    for pipeline in cfg.pipelines:
        curves, losses = {}, {}
        for width in cfg.widths:
            curve = _read_llcurve(_require(cfg, llcurve_name(pipeline, width), "sample-eval"))
            curves[width] = curve
            summary["reference_ll"] = curve["reference"]
            losses[width] = _read_loss(_require(cfg, loss_name(pipeline, width), "train"))
            snapshots = {
                step: load_dataset_csv(_path(cfg, snapshot_name(pipeline, width, step))).points
                for step in cfg.snapshot_steps
                if os.path.exists(_path(cfg, snapshot_name(pipeline, width, step)))
            }
            report.render_snapshot_grid(
                train_points, snapshots, pipeline, width,
                _path(cfg, f"snapshots_{pipeline}_w{width}.svg"))
        report.render_ll_curves(curves, pipeline, _path(cfg, f"loglik_{pipeline}.svg"))
        report.render_loss_curves(losses, pipeline, _path(cfg, f"loss_{pipeline}.svg"))
        summary["ll_curves"][pipeline] = {
            str(w): {"steps": c["steps"], "values": c["values"]} for w, c in curves.items()
        }
        summary["final_window_mean_loss"][pipeline] = {
            str(w): float(np.mean(loss[-max(1, loss.size // 10):])) for w, loss in losses.items()
        }
    diag_path = _path(cfg, "transform_diagnostics.json")
    if os.path.exists(diag_path):
        with open(diag_path, "r", encoding="utf-8") as fh:
            summary["gaussianizer_diagnostics"] = json.load(fh)
    with open(_path(cfg, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def _run_job(cfg: ExperimentConfig, pipeline: str, width: int) -> None:
    cmd_train(cfg, pipeline, width)
    cmd_sample_eval(cfg, pipeline, width)


def cmd_run_all(cfg: ExperimentConfig) -> None:
    """Full experiment: data, transform, all (pipeline x width) jobs, report.

    Jobs are independent and write disjoint files, so they run concurrently;
    results are identical to running them one by one.
    """
    cmd_gen_data(cfg)
    if "gaussianized" in cfg.pipelines:
        cmd_fit_transform(cfg)
    jobs = [(p, w) for p in cfg.pipelines for w in cfg.widths]
    workers = cfg.jobs if cfg.jobs > 0 else min(4, len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        for pipeline, width in jobs:
            _run_job(cfg, pipeline, width)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_job, cfg, p, w) for p, w in jobs]
            for fut in futures:
                fut.result()
    cmd_report(cfg)
