"""Ancestral sampling with position-dependent classifier-free guidance.

Every reverse step evaluates the denoiser twice, with the input frame's
conditioning at its focal slot and with all-zero conditioning, and combines
the two noise estimates as (1+w)*conditional - w*unconditional.  All F
frames of the stack are generated jointly in one pass from pure noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.image import FocalStack, FocusSetting, Image, InvariantError
from ..core.rng import Rng
from ..nn.optim import ParamStore, denoiser_forward
from .conditioning import (
    MODE_POSITION,
    MODE_REPLICATED,
    build_conditioning,
    from_model_domain,
    to_model_domain,
)
from .schedule import NoiseSchedule

CFG_WEIGHT_DEFAULT = 1.5


@dataclass(frozen=True)
class SamplerConfig:
    w: float = CFG_WEIGHT_DEFAULT
    steps: int = 1000
    seed: int = 0
    mode: str = MODE_POSITION
    ema: bool = True

    def __post_init__(self):
        if self.w < 0:
            raise InvariantError(f"guidance weight must be >= 0, got {self.w}")
        if self.steps < 1:
            raise InvariantError(f"steps must be >= 1, got {self.steps}")
        if self.mode not in (MODE_POSITION, MODE_REPLICATED):
            raise InvariantError(f"sampler mode must be conditional, got {self.mode!r}")


def cfg_combine(eps_cond: np.ndarray, eps_uncond: np.ndarray, w: float) -> np.ndarray:
    """(1 + w) * conditional - w * unconditional."""
    eps_cond = np.asarray(eps_cond)
    eps_uncond = np.asarray(eps_uncond)
    if eps_cond.shape != eps_uncond.shape:
        raise ValueError(
            f"cfg_combine: shape mismatch {eps_cond.shape} vs {eps_uncond.shape}")
    return (1.0 + w) * eps_cond - w * eps_uncond


def _time_subsequence(total: int, steps: int) -> np.ndarray:
    if steps > total:
        raise InvariantError(f"steps {steps} exceeds schedule length {total}")
    ts = np.unique(np.linspace(0, total - 1, steps).round().astype(np.int64))
    return ts[::-1]  # descending


def ancestral_sample(predict, shape, schedule: NoiseSchedule, steps: int, rng: Rng) -> np.ndarray:
    """Generic reverse loop: predict(z_t, t) -> combined noise estimate.

    Runs the (possibly strided) DDPM posterior with fresh per-step noise
    from the seeded stream; deterministic given the rng state.
    """
    ts = _time_subsequence(schedule.total_steps, steps)
    ab = schedule.alpha_bar
    z = rng.normal(shape).astype(np.float32)
    for i, t in enumerate(ts):
        eps = predict(z, int(t))
        ab_t = ab[t]
        ab_s = ab[ts[i + 1]] if i + 1 < len(ts) else 1.0
        alpha_eff = ab_t / ab_s
        beta_eff = 1.0 - alpha_eff
        mean = (z - beta_eff / np.sqrt(1.0 - ab_t) * eps) / np.sqrt(alpha_eff)
        if i + 1 < len(ts):
            var = beta_eff * (1.0 - ab_s) / (1.0 - ab_t)
            z = mean + np.sqrt(var) * rng.normal(shape).astype(np.float32)
        else:
            z = mean
        z = z.astype(np.float32)
    return z


def _guided_predictor(store: ParamStore, cond_folded: np.ndarray, cfg: SamplerConfig,
                      pos_id=None):
    """Batched CFG predictor; conditional and null branches share one forward."""
    b = cond_folded.shape[0]
    null_cond = np.zeros_like(cond_folded)
    both_cond = np.concatenate([cond_folded, null_cond], axis=0)
    pos_both = None
    if store.arch.position_embed:
        base = np.full(b, -1, dtype=np.int64) if pos_id is None else np.asarray(pos_id)
        pos_both = np.concatenate([base, np.full(b, -1, dtype=np.int64)])

    def predict(z_t, t):
        z_both = np.concatenate([z_t, z_t], axis=0)
        t_both = np.full(2 * b, t, dtype=np.int64)
        eps, _ = denoiser_forward(store, z_both, both_cond, t_both,
                                  pos_id=pos_both, use_ema=cfg.ema)
        return cfg_combine(eps[:b], eps[b:], cfg.w)

    return predict


def sample_stack_batch(inputs: np.ndarray, p: int, store: ParamStore,
                       schedule: NoiseSchedule, cfg: SamplerConfig) -> np.ndarray:
    """Generate stacks for a batch of input frames at focal position p.

    inputs: (B, C, H, W) pixels in [0, 1]; returns (B, F, C, H, W) in [0, 1].
    """
    arch = store.arch
    b, c, h, w = inputs.shape
    if c != arch.channels:
        raise ValueError(f"input has {c} channels, model expects {arch.channels}")
    f = arch.frames
    conds = [build_conditioning(to_model_domain(inputs[i]), p, f, cfg.mode) for i in range(b)]
    cond_folded = np.stack([ct.folded() for ct in conds], axis=0)
    pos_id = np.full(b, p, dtype=np.int64) if arch.position_embed else None
    rng = Rng(cfg.seed)
    predict = _guided_predictor(store, cond_folded, cfg, pos_id)
    z0 = ancestral_sample(predict, (b, f * c, h, w), schedule, cfg.steps, rng)
    return from_model_domain(z0).reshape(b, f, c, h, w)


def _stack_from_array(frames_arr: np.ndarray, settings=None) -> FocalStack:
    f = frames_arr.shape[0]
    frames = tuple(Image(frames_arr[i].transpose(1, 2, 0)) for i in range(f))
    if settings is None:
        settings = tuple(FocusSetting(i, i * 0.1, 1.0) for i in range(f))
    return FocalStack(frames, tuple(settings), aligned=True)


def sample_provenance(store: ParamStore, cfg: SamplerConfig, checkpoint_hash: str | None = None) -> dict:
    prov = {"mode": cfg.mode, "w": cfg.w, "steps": cfg.steps, "seed": cfg.seed,
            "ema": cfg.ema, "trained": store.step > 0, "train_steps": store.step}
    if checkpoint_hash:
        prov["checkpoint"] = checkpoint_hash
    if store.step == 0:
        prov["warning"] = "sampled from untrained parameters"
    return prov


def sample_stack(input_image: Image, p: int, store: ParamStore, schedule: NoiseSchedule,
                 cfg: SamplerConfig, settings=None) -> tuple:
    """Generate the full focal stack for one input frame; returns (stack, provenance)."""
    if cfg.mode != MODE_POSITION:
        raise InvariantError("sample_stack uses position-dependent conditioning; "
                             "use sample_stack_ablation for replicated mode")
    arr = input_image.data.transpose(2, 0, 1)[None]
    out = sample_stack_batch(arr, p, store, schedule, cfg)[0]
    return _stack_from_array(out, settings), sample_provenance(store, cfg)


def sample_stack_ablation(input_image: Image, p: int, store: ParamStore,
                          schedule: NoiseSchedule, cfg: SamplerConfig, settings=None) -> tuple:
    """Replicated-conditioning sampler (scalar position id stands in for slot identity)."""
    if cfg.mode != MODE_REPLICATED:
        cfg = SamplerConfig(w=cfg.w, steps=cfg.steps, seed=cfg.seed,
                            mode=MODE_REPLICATED, ema=cfg.ema)
    if not store.arch.position_embed:
        raise InvariantError("ablation sampling expects a position-embedding model")
    arr = input_image.data.transpose(2, 0, 1)[None]
    out = sample_stack_batch(arr, p, store, schedule, cfg)[0]
    return _stack_from_array(out, settings), sample_provenance(store, cfg)


def regress_stack(input_image: Image, p: int, store: ParamStore, settings=None) -> tuple:
    """Single-forward regression baseline: sparse stack in, full stack out."""
    arch = store.arch
    arr = to_model_domain(input_image.data.transpose(2, 0, 1))
    cond = build_conditioning(arr, p, arch.frames, MODE_POSITION)
    out, _ = denoiser_forward(store, None, cond.folded()[None], t=np.zeros(1, dtype=np.int64))
    frames_arr = from_model_domain(out[0]).reshape(arch.frames, arch.channels,
                                                   input_image.height, input_image.width)
    prov = {"mode": "regression", "trained": store.step > 0, "train_steps": store.step}
    return _stack_from_array(frames_arr, settings), prov


def regress_stack_batch(inputs: np.ndarray, p: int, store: ParamStore) -> np.ndarray:
    """(B, C, H, W) in [0,1] -> (B, F, C, H, W) regression output."""
    arch = store.arch
    b, c, h, w = inputs.shape
    conds = [build_conditioning(to_model_domain(inputs[i]), p, arch.frames, MODE_POSITION)
             for i in range(b)]
    folded = np.stack([ct.folded() for ct in conds], axis=0)
    out, _ = denoiser_forward(store, None, folded, t=np.zeros(b, dtype=np.int64))
    return from_model_domain(out).reshape(b, arch.frames, c, h, w)
