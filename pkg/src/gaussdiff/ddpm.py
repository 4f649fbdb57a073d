"""Minimal denoising diffusion model on vectors.

Linear beta schedule, closed-form forward noising, a three-hidden-layer MLP
noise predictor with hand-written backpropagation, Adam updates, and the
ancestral reverse sampler.  Everything is plain numpy so a run is fully
reproducible from (config, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .gmm import Dataset
from .rng import make_rng, standard_normal, uniform_open

__all__ = [
    "WIDTH_TABLE",
    "DiffusionSchedule",
    "EpsNetParams",
    "TrainConfig",
    "AdamState",
    "make_schedule",
    "forward_diffuse",
    "time_embedding",
    "init_eps_net",
    "eps_net_forward",
    "batch_loss_and_grads",
    "init_adam",
    "train_step",
    "train",
    "reverse_step",
    "reverse_step_with_predictor",
    "sample",
    "sample_with_predictor",
    "save_model",
    "load_model",
]

# Hidden widths for each named configuration: each row doubles per layer.
WIDTH_TABLE = {16: (16, 32, 64), 32: (32, 64, 128), 64: (64, 128, 256), 128: (128, 256, 512)}

T_EMBED_DEFAULT = 8


@dataclass(frozen=True)
class DiffusionSchedule:
    """Beta schedule with the derived alpha tables.

    Index ``t - 1`` holds diffusion step ``t`` for t in 1..T.  The posterior
    variance at t=1 uses the convention alpha_bar(0) = 1, which makes the
    final denoising step deterministic.
    """

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    posterior_vars: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("betas must be a non-empty vector")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("betas must lie strictly inside (0, 1)")
        if np.any(np.diff(betas) < 0.0):
            raise ValueError("betas must be non-decreasing")
        alpha_bars = np.asarray(self.alpha_bars, dtype=np.float64)
        if np.any(np.diff(alpha_bars) >= 0.0):
            raise ValueError("alpha_bars must be strictly decreasing")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=np.float64))
        object.__setattr__(self, "alpha_bars", alpha_bars)
        object.__setattr__(self, "posterior_vars", np.asarray(self.posterior_vars, dtype=np.float64))

    @property
    def T(self) -> int:
        return self.betas.shape[0]


def _schedule_from_betas(betas: np.ndarray) -> DiffusionSchedule:
    betas = np.asarray(betas, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    abar_prev = np.concatenate(([1.0], alpha_bars[:-1]))
    posterior_vars = (1.0 - abar_prev) / (1.0 - alpha_bars) * betas
    return DiffusionSchedule(betas=betas, alphas=alphas, alpha_bars=alpha_bars,
                             posterior_vars=posterior_vars)


def make_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.1) -> DiffusionSchedule:
    """Linear beta schedule from beta_start to beta_end inclusive.

    The default endpoint is sized for T = 100 so the terminal signal
    fraction alpha_bar(T) is ~6e-3; the common 1000-step endpoint of 0.02
    would leave ~36% of the signal at t = T and the reverse chain would
    start far from its assumed Gaussian prior.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    return _schedule_from_betas(np.linspace(beta_start, beta_end, T))


def _check_t(sched: DiffusionSchedule, t) -> np.ndarray:
    t_arr = np.asarray(t)
    if np.any(t_arr < 1) or np.any(t_arr > sched.T):
        raise ValueError(f"step index t must lie in 1..{sched.T}")
    return t_arr


def forward_diffuse(x0, t, eps, sched: DiffusionSchedule):
    """Closed-form noising: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.

    ``t`` may be a scalar or a per-row vector of step indices.
    """
    t_arr = _check_t(sched, t)
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    abar = sched.alpha_bars[t_arr - 1]
    if x0.ndim == 2 and np.ndim(t) == 1:
        abar = abar[:, None]
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def time_embedding(t, T: int, n_features: int = T_EMBED_DEFAULT) -> np.ndarray:
    """Sinusoidal features of the normalized step t/T.

    Pairs sin(2^k pi t/T), cos(2^k pi t/T) for k = 0..n_features/2 - 1, so
    the network input width stays independent of T.
    """
    tau = np.atleast_1d(np.asarray(t, dtype=np.float64)) / T
    ks = 2.0 ** np.arange(n_features // 2)
    angles = np.pi * tau[:, None] * ks[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    return emb if np.ndim(t) else emb[0]


@dataclass(frozen=True)
class EpsNetParams:
    """Weights of the noise predictor: input(d + t_embed) -> three rectified
    hidden layers of the configured widths -> linear output(d)."""

    weights: tuple
    biases: tuple
    widths: tuple
    t_embed: int
    dim: int

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        sizes = (self.dim + self.t_embed, *self.widths, self.dim)
        if len(weights) != 4 or len(biases) != 4:
            raise ValueError("expected 3 hidden layers plus an output projection")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i} has shape {w.shape}, expected {(sizes[i], sizes[i + 1])}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i} contains non-finite parameters")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 20_000
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    b1: float = 0.9
    b2: float = 0.999
    eps_stability: float = 1e-8

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch_size must be >= 1")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")


def resolve_widths(width) -> tuple:
    """Map a named width (16/32/64/128) or an explicit triple to layer widths."""
    if isinstance(width, (tuple, list)):
        if len(width) != 3:
            raise ValueError("custom widths must be a triple")
        return tuple(int(w) for w in width)
    if int(width) in WIDTH_TABLE:
        return WIDTH_TABLE[int(width)]
    raise ValueError(f"unknown width {width}; use one of {sorted(WIDTH_TABLE)} or a triple")


def init_eps_net(dim: int, width, t_embed: int = T_EMBED_DEFAULT, seed: int = 0) -> EpsNetParams:
    """Glorot-uniform initialized predictor, biases zero, deterministic per seed."""
    widths = resolve_widths(width)
    sizes = (dim + t_embed, *widths, dim)
    rng = make_rng(seed, "eps-net-init")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append((2.0 * uniform_open(rng, (fan_in, fan_out)) - 1.0) * limit)
        biases.append(np.zeros(fan_out))
    return EpsNetParams(weights=tuple(weights), biases=tuple(biases),
                        widths=widths, t_embed=t_embed, dim=dim)


def _net_input(params: EpsNetParams, x: np.ndarray, t, T: int) -> np.ndarray:
    emb = time_embedding(t, T, params.t_embed)
    if emb.ndim == 1:
        emb = np.broadcast_to(emb, (x.shape[0], params.t_embed))
    return np.concatenate([x, emb], axis=1)


def _forward_cached(params: EpsNetParams, inp: np.ndarray):
    w, b = params.weights, params.biases
    a1 = inp @ w[0] + b[0]
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ w[1] + b[1]
    h2 = np.maximum(a2, 0.0)
    a3 = h2 @ w[2] + b[2]
    h3 = np.maximum(a3, 0.0)
    out = h3 @ w[3] + b[3]
    return out, (inp, a1, h1, a2, h2, a3, h3)


def eps_net_forward(params: EpsNetParams, x, t, T: int):
    """Predicted noise for samples ``x`` at step ``t`` (scalar or per-row)."""
    x_arr = np.asarray(x, dtype=np.float64)
    single = x_arr.ndim == 1
    if single:
        x_arr = x_arr[None, :]
    if x_arr.shape[1] != params.dim:
        raise ValueError(f"x must have dimension {params.dim}")
    out, _ = _forward_cached(params, _net_input(params, x_arr, t, T))
    return out[0] if single else out


def batch_loss_and_grads(params: EpsNetParams, x_t: np.ndarray, t, eps: np.ndarray, T: int):
    """Mean-squared noise-prediction loss with hand-derived gradients.

    Returns (loss, per-layer (dW, db) tuples, gradient w.r.t. x_t).  The
    loss averages over both batch and dimensions so curves are comparable
    across widths.
    """
    w = params.weights
    inp = _net_input(params, np.asarray(x_t, dtype=np.float64), t, T)
    out, (inp, a1, h1, a2, h2, a3, h3) = _forward_cached(params, inp)
    resid = out - eps
    n_total = resid.size
    loss = float(np.sum(resid * resid) / n_total)

    d_out = 2.0 * resid / n_total
    d_w4 = h3.T @ d_out
    d_b4 = d_out.sum(axis=0)
    d_a3 = (d_out @ w[3].T) * (a3 > 0.0)
    d_w3 = h2.T @ d_a3
    d_b3 = d_a3.sum(axis=0)
    d_a2 = (d_a3 @ w[2].T) * (a2 > 0.0)
    d_w2 = h1.T @ d_a2
    d_b2 = d_a2.sum(axis=0)
    d_a1 = (d_a2 @ w[1].T) * (a1 > 0.0)
    d_w1 = inp.T @ d_a1
    d_b1 = d_a1.sum(axis=0)
    d_x = (d_a1 @ w[0].T)[:, : params.dim]
    grads = ((d_w1, d_b1), (d_w2, d_b2), (d_w3, d_b3), (d_w4, d_b4))
    return loss, grads, d_x


@dataclass(frozen=True)
class AdamState:
    step: int
    m: tuple
    v: tuple


def init_adam(params: EpsNetParams) -> AdamState:
    zeros = tuple((np.zeros_like(w), np.zeros_like(b))
                  for w, b in zip(params.weights, params.biases))
    return AdamState(step=0, m=zeros, v=zeros)


def _adam_update(params: EpsNetParams, grads, state: AdamState, cfg: TrainConfig):
    step = state.step + 1
    corr1 = 1.0 - cfg.b1 ** step
    corr2 = 1.0 - cfg.b2 ** step
    new_w, new_b, new_m, new_v = [], [], [], []
    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(
            zip(params.weights, params.biases), grads, state.m, state.v):
        mw = cfg.b1 * mw + (1.0 - cfg.b1) * gw
        mb = cfg.b1 * mb + (1.0 - cfg.b1) * gb
        vw = cfg.b2 * vw + (1.0 - cfg.b2) * gw * gw
        vb = cfg.b2 * vb + (1.0 - cfg.b2) * gb * gb
        new_w.append(w - cfg.learning_rate * (mw / corr1) / (np.sqrt(vw / corr2) + cfg.eps_stability))
        new_b.append(b - cfg.learning_rate * (mb / corr1) / (np.sqrt(vb / corr2) + cfg.eps_stability))
        new_m.append((mw, mb))
        new_v.append((vw, vb))
    params = EpsNetParams(weights=tuple(new_w), biases=tuple(new_b),
                          widths=params.widths, t_embed=params.t_embed, dim=params.dim)
    return params, AdamState(step=step, m=tuple(new_m), v=tuple(new_v))


def train_step(params: EpsNetParams, opt: AdamState, batch, sched: DiffusionSchedule,
               cfg: TrainConfig, rng: np.random.Generator):
    """One noise-prediction step: draw (t, eps) per example, noise the batch,
    backpropagate the MSE and apply an Adam update."""
    points = np.asarray(batch.points if isinstance(batch, Dataset) else batch, dtype=np.float64)
    if points.shape[0] < 1:
        raise ValueError("train_step needs a non-empty batch")
    n = points.shape[0]
    t = rng.integers(1, sched.T + 1, size=n)
    eps = standard_normal(rng, points.shape)
    x_t = forward_diffuse(points, t, eps, sched)
    loss, grads, _ = batch_loss_and_grads(params, x_t, t, eps, sched.T)
    if not np.isfinite(loss):
        raise RuntimeError("training diverged: non-finite loss")
    params, opt = _adam_update(params, grads, opt, cfg)
    return params, opt, loss


def train(params: EpsNetParams, data, sched: DiffusionSchedule, cfg: TrainConfig):
    """Run cfg.iterations seeded-minibatch steps; returns final params and the
    per-iteration loss curve."""
    points = np.asarray(data.points if isinstance(data, Dataset) else data, dtype=np.float64)
    if points.shape[0] < 1:
        raise ValueError("training data is empty")
    rng = make_rng(cfg.seed, "ddpm-train")
    opt = init_adam(params)
    losses = np.empty(cfg.iterations)
    for i in range(cfg.iterations):
        idx = rng.integers(0, points.shape[0], size=cfg.batch_size)
        params, opt, losses[i] = train_step(params, opt, points[idx], sched, cfg, rng)
    return params, losses


def reverse_step_with_predictor(predict_fn, x_t, t: int, sched: DiffusionSchedule, noise=None):
    """One ancestral denoising step using an arbitrary noise predictor.

    Returns the posterior mean plus sqrt(posterior_var) * noise; the final
    step (t = 1) is deterministic.
    """
    _check_t(sched, t)
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = predict_fn(x_t, t)
    beta = sched.betas[t - 1]
    mean = (x_t - beta / np.sqrt(1.0 - sched.alpha_bars[t - 1]) * eps_hat) \
        / np.sqrt(sched.alphas[t - 1])
    if t == 1 or noise is None:
        return mean
    return mean + np.sqrt(sched.posterior_vars[t - 1]) * noise


def reverse_step(params: EpsNetParams, x_t, t: int, sched: DiffusionSchedule, noise=None):
    """Ancestral denoising step with the trained predictor."""
    return reverse_step_with_predictor(
        lambda x, step: eps_net_forward(params, x, step, sched.T), x_t, t, sched, noise)


def sample_with_predictor(predict_fn, dim: int, sched: DiffusionSchedule, n: int,
                          seed: int, record_at=(0,)) -> dict:
    """Ancestral sampling from pure noise, recording requested snapshots.

    ``record_at`` holds reverse-step counts: s denoising steps taken, so
    s = 0 is the initial Gaussian and s = T the final sample.  Returns a
    dict mapping each requested s to its (n, dim) sample matrix.
    """
    record_at = set(int(s) for s in record_at)
    if any(s < 0 or s > sched.T for s in record_at):
        raise ValueError(f"record_at entries must lie in 0..{sched.T}")
    rng = make_rng(seed, "ddpm-sample")
    x = standard_normal(rng, (n, dim))
    snapshots = {}
    if 0 in record_at:
        snapshots[0] = x.copy()
    for t in range(sched.T, 0, -1):
        noise = standard_normal(rng, (n, dim)) if t > 1 else None
        x = reverse_step_with_predictor(predict_fn, x, t, sched, noise)
        s = sched.T - t + 1
        if s in record_at:
            snapshots[s] = x.copy()
    return snapshots


def sample(params: EpsNetParams, sched: DiffusionSchedule, n: int, seed: int,
           record_at=(0,)) -> dict:
    """Ancestral sampling with the trained predictor (see sample_with_predictor)."""
    return sample_with_predictor(
        lambda x, t: eps_net_forward(params, x, t, sched.T),
        params.dim, sched, n, seed, record_at)


def save_model(params: EpsNetParams, sched: DiffusionSchedule, path) -> None:
    """Self-contained JSON with the net weights (row-major) and the schedule."""
    payload = {
        "net": {
            "dim": params.dim,
            "t_embed": params.t_embed,
            "widths": list(params.widths),
            "weights": [w.tolist() for w in params.weights],
            "biases": [b.tolist() for b in params.biases],
        },
        "schedule": {"betas": sched.betas.tolist()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed model JSON: {exc}") from None
    try:
        net = payload["net"]
        params = EpsNetParams(
            weights=tuple(np.asarray(w, dtype=np.float64) for w in net["weights"]),
            biases=tuple(np.asarray(b, dtype=np.float64) for b in net["biases"]),
            widths=tuple(net["widths"]),
            t_embed=int(net["t_embed"]),
            dim=int(net["dim"]),
        )
        sched = _schedule_from_betas(np.asarray(payload["schedule"]["betas"], dtype=np.float64))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed model JSON: missing or bad field ({exc!r})") from None
    return params, sched
