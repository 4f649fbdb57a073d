"""Matplotlib figure rendering for the report subcommand.

All figures are written as SVG.  The hash salt and stripped date metadata
keep the output stable across reruns of the same experiment.
"""

from __future__ import annotations

import math

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "gaussdiff"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_snapshot_grid", "render_ll_curves", "render_loss_curves"]

_TRAIN_COLOR = "tab:orange"
_GEN_COLOR = "tab:blue"
_REF_COLOR = "red"
_SCATTER_CAP = 2000


def _save(fig, path: str) -> None:
    if str(path).endswith(".svg"):
        # dropping the date metadata keeps reruns byte-identical
        fig.savefig(path, format="svg", metadata={"Date": None})
    else:
        fig.savefig(path)
    plt.close(fig)


def render_snapshot_grid(train_points: np.ndarray, snapshots: dict, pipeline: str,
                         width: int, path: str) -> None:
    """Scatter grid of reverse-process snapshots over the training data.

    Orange: training samples; blue: generated samples after the given number
    of denoising steps.  Only the first two coordinates are drawn.
    """
    steps = sorted(snapshots)
    n_panels = max(1, len(steps))
    n_cols = min(4, n_panels)
    n_rows = math.ceil(n_panels / n_cols)
    fig, axes = plt.subplots(n_rows, n_cols, figsize=(3.0 * n_cols, 3.0 * n_rows),
                             squeeze=False, sharex=True, sharey=True)
    train_xy = train_points[:_SCATTER_CAP, :2]
    lim = 1.15 * max(np.abs(train_xy).max(), 1.0)
    for ax, step in zip(axes.ravel(), steps):
        gen = np.asarray(snapshots[step])[:_SCATTER_CAP, :2]
        ax.scatter(train_xy[:, 0], train_xy[:, 1], s=4, c=_TRAIN_COLOR, alpha=0.35,
                   linewidths=0, label="training data")
        ax.scatter(gen[:, 0], gen[:, 1], s=4, c=_GEN_COLOR, alpha=0.5,
                   linewidths=0, label="generated")
        ax.set_title(f"step {step}", fontsize=10)
        ax.set_xlim(-lim, lim)
        ax.set_ylim(-lim, lim)
        ax.set_aspect("equal")
    for ax in axes.ravel()[len(steps):]:
        ax.axis("off")
    handles, labels = axes[0, 0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower right", frameon=False)
    fig.suptitle(f"{pipeline}, width {width}")
    fig.tight_layout(rect=(0, 0.02, 1, 0.96))
    _save(fig, path)


def render_ll_curves(curves: dict, pipeline: str, path: str) -> None:
    """Average log-likelihood vs reverse step, one line per width, with the
    reference value as a red dashed line."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    reference = None
    for width in sorted(curves):
        curve = curves[width]
        ax.plot(curve["steps"], curve["values"], marker="o", markersize=3,
                label=f"width {width}")
        reference = curve["reference"]
    if reference is not None:
        ax.axhline(reference, color=_REF_COLOR, linestyle="--", linewidth=1.2,
                   label="reference")
    ax.set_xlabel("reverse step")
    ax.set_ylabel("average log-likelihood")
    ax.set_title(f"{pipeline}: log-likelihood vs reverse step")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)


def render_loss_curves(losses: dict, pipeline: str, path: str) -> None:
    """Training loss per iteration, one line per width, thinned for rendering."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for width in sorted(losses):
        loss = np.asarray(losses[width])
        stride = max(1, loss.size // 2000)
        xs = np.arange(1, loss.size + 1)[::stride]
        ax.plot(xs, loss[::stride], linewidth=0.9, label=f"width {width}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("training loss")
    ax.set_title(f"{pipeline}: training loss")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)
