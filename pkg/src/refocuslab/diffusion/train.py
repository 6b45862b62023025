"""Training steps for the diffusion refocuser, its replicated-conditioning
ablation, and the direct-regression baseline.

Batches are (B, F, C, H, W) float32 stacks in [0, 1]; everything runs in
the [-1, 1] model domain internally.  One training_step call draws per
element a focal position, a timestep, and noise, builds the conditioning,
and applies backprop + Adam + EMA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.image import InvariantError
from ..core.rng import Rng
from ..nn import adam_step, denoiser_backward, denoiser_forward, ema_update
from ..nn.optim import ParamStore
from ..nn.tensor import NumericError
from .conditioning import (
    MODE_POSITION,
    MODE_REPLICATED,
    to_model_domain,
)
from .schedule import NoiseSchedule, q_sample

TRAIN_MODE_DIFFUSION = "diffusion"
TRAIN_MODE_ABLATION = "ablation"
TRAIN_MODE_REGRESSION = "regression"
TRAIN_MODES = (TRAIN_MODE_DIFFUSION, TRAIN_MODE_ABLATION, TRAIN_MODE_REGRESSION)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    uncond_prob: float = 0.1
    lr: float = 4e-4
    total_steps: int = 3000
    frames: int = 5
    resolution: int = 32
    channels: int = 1
    ema_rate: float = 1e-3
    mode: str = TRAIN_MODE_DIFFUSION

    def __post_init__(self):
        if not (0.0 <= self.uncond_prob < 1.0):
            raise InvariantError(f"uncond_prob must be in [0, 1), got {self.uncond_prob}")
        if self.mode not in TRAIN_MODES:
            raise InvariantError(f"unknown train mode {self.mode!r}")
        if self.batch_size < 1 or self.total_steps < 0:
            raise InvariantError("batch_size >= 1 and total_steps >= 0 required")


def draw_conditioning_plan(rng: Rng, batch: int, frames: int, uncond_prob: float):
    """Per-element focal positions and the unconditional-dropout mask."""
    p = rng.integers(0, frames, (batch,))
    uncond = rng.uniform((batch,)) < uncond_prob
    return p, uncond


def _fold(stacks: np.ndarray) -> np.ndarray:
    b, f, c, h, w = stacks.shape
    return stacks.reshape(b, f * c, h, w)


def _build_cond_batch(x_model: np.ndarray, p: np.ndarray, uncond: np.ndarray, mode: str):
    """Conditioning slots (B, F, C, H, W) from model-domain stacks."""
    b, f, c, h, w = x_model.shape
    cond = np.zeros_like(x_model)
    rows = np.arange(b)
    picked = x_model[rows, p]  # (B, C, H, W)
    if mode == MODE_POSITION:
        cond[rows, p] = picked
    else:  # replicated
        cond[:] = picked[:, None]
    cond[uncond] = 0.0
    return cond


def training_step(stacks: np.ndarray, store: ParamStore, schedule: NoiseSchedule,
                  cfg: TrainConfig, rng: Rng, scene_ids=None) -> float:
    """One denoising step: draw (p, t, eps), build conditioning, MSE, update.

    `stacks` is (B, F, C, H, W) in [0, 1].  Returns the batch loss.
    """
    if cfg.mode == TRAIN_MODE_REGRESSION:
        return train_regression(stacks, store, cfg, rng, scene_ids)
    b, f = stacks.shape[:2]
    x = to_model_domain(stacks)
    p, uncond = draw_conditioning_plan(rng, b, f, cfg.uncond_prob)
    t = rng.integers(0, schedule.total_steps, (b,))
    eps = rng.normal(x.shape).astype(np.float32)
    z_t = q_sample(x, t, eps, schedule).astype(np.float32)

    cond_mode = MODE_POSITION if cfg.mode == TRAIN_MODE_DIFFUSION else MODE_REPLICATED
    cond = _build_cond_batch(x, p, uncond, cond_mode)
    pos_id = None
    if store.arch.position_embed:
        pos_id = np.where(uncond, -1, p)

    eps_hat, cache = denoiser_forward(store, _fold(z_t), _fold(cond), t, pos_id=pos_id)
    resid = eps_hat - _fold(eps)
    loss = float(np.mean(resid * resid))
    if not np.isfinite(loss):
        ids = list(scene_ids) if scene_ids is not None else ["?"] * b
        raise NumericError(
            f"non-finite training loss (t={t.tolist()}, p={p.tolist()}, scenes={ids})")
    d_eps = (2.0 / resid.size) * resid
    grads = denoiser_backward(store, cache, d_eps)
    adam_step(store, grads, lr=cfg.lr)
    ema_update(store, rate=cfg.ema_rate)
    return loss


def train_regression(stacks: np.ndarray, store: ParamStore, cfg: TrainConfig,
                     rng: Rng, scene_ids=None) -> float:
    """Direct L2 regression: sparse stack in, full stack out; no noise, no timestep."""
    b, f = stacks.shape[:2]
    x = to_model_domain(stacks)
    p = rng.integers(0, f, (b,))
    cond = _build_cond_batch(x, p, np.zeros(b, dtype=bool), MODE_POSITION)
    out, cache = denoiser_forward(store, None, _fold(cond), t=np.zeros(b, dtype=np.int64))
    resid = out - _fold(x)
    loss = float(np.mean(resid * resid))
    if not np.isfinite(loss):
        ids = list(scene_ids) if scene_ids is not None else ["?"] * b
        raise NumericError(f"non-finite regression loss (p={p.tolist()}, scenes={ids})")
    d_out = (2.0 / resid.size) * resid
    grads = denoiser_backward(store, cache, d_out)
    adam_step(store, grads, lr=cfg.lr)
    ema_update(store, rate=cfg.ema_rate)
    return loss
