"""Training orchestration: dataset batching, logging, checkpoints, resume."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from ..core.rng import Rng
from ..diffusion import (
    TRAIN_MODE_ABLATION,
    TRAIN_MODE_DIFFUSION,
    TRAIN_MODE_REGRESSION,
    NoiseSchedule,
    TrainConfig,
    training_step,
)
from ..nn import DenoiserArch, INPUT_COND_ONLY, INPUT_NOISY_PLUS_COND, create_store, load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import DataError, load_dataset


def arch_for_mode(cfg: RunConfig, mode: str) -> DenoiserArch:
    common = dict(
        frames=cfg.lens.focus_count,
        channels=cfg.scene.channels,
        base_width=cfg.train.base_width,
        depth=cfg.train.depth,
        time_dim=cfg.train.time_dim,
    )
    if mode == TRAIN_MODE_DIFFUSION:
        return DenoiserArch(input_kind=INPUT_NOISY_PLUS_COND, position_embed=False, **common)
    if mode == TRAIN_MODE_ABLATION:
        return DenoiserArch(input_kind=INPUT_NOISY_PLUS_COND, position_embed=True, **common)
    if mode == TRAIN_MODE_REGRESSION:
        return DenoiserArch(input_kind=INPUT_COND_ONLY, position_embed=False, **common)
    raise ValueError(f"unknown training mode {mode!r}")


def schedule_from_config(cfg: RunConfig) -> NoiseSchedule:
    return NoiseSchedule.linear(cfg.train.t_steps, cfg.train.beta_start, cfg.train.beta_end)


def train_config(cfg: RunConfig, mode: str) -> TrainConfig:
    return TrainConfig(
        batch_size=cfg.train.batch_size,
        uncond_prob=cfg.train.uncond_prob,
        lr=cfg.train.lr,
        total_steps=cfg.train.total_steps,
        frames=cfg.lens.focus_count,
        resolution=cfg.scene.width,
        channels=cfg.scene.channels,
        ema_rate=cfg.train.ema_rate,
        mode=mode,
    )


def run_training(cfg: RunConfig, data_dir, ckpt_dir, mode: str,
                 resume=None, provenance: dict | None = None, quiet: bool = False) -> dict:
    """Train to cfg.train.total_steps; returns {final_loss, final_checkpoint, steps_run}."""
    stacks, scene_ids, index = load_dataset(data_dir)
    s, f, c, h, w = stacks.shape
    if f != cfg.lens.focus_count or c != cfg.scene.channels:
        raise DataError(
            f"dataset shape (F={f}, C={c}) does not match config "
            f"(F={cfg.lens.focus_count}, C={cfg.scene.channels})")
    if index.get("breathing"):
        raise DataError("training data must be breathing-free (clean or processed stacks)")

    out = Path(ckpt_dir)
    out.mkdir(parents=True, exist_ok=True)
    tcfg = train_config(cfg, mode)
    schedule = schedule_from_config(cfg)

    if resume:
        store, rng_state, meta = load_checkpoint(resume)
        if meta.get("mode") != mode:
            raise DataError(f"checkpoint was trained in mode {meta.get('mode')!r}, not {mode!r}")
        rng = Rng.from_state(rng_state)
    else:
        store = create_store(arch_for_mode(cfg, mode), Rng(cfg.seed).split(1001))
        rng = Rng(cfg.seed).split(2002)

    meta = {"mode": mode, "config_hash": cfg.hash(), "seed": cfg.seed,
            "train": {"t_steps": cfg.train.t_steps, "beta_start": cfg.train.beta_start,
                      "beta_end": cfg.train.beta_end},
            "sampler": {"w": cfg.sampler.w, "steps": cfg.sampler.steps, "ema": cfg.sampler.ema}}
    if provenance:
        meta.update(provenance)

    log_path = out / f"log_{mode}.jsonl"
    loss = float("nan")
    steps_run = 0
    with log_path.open("a", encoding="utf-8") as log:
        while store.step < tcfg.total_steps:
            t0 = time.monotonic()
            idx = rng.integers(0, s, (tcfg.batch_size,))
            batch = stacks[idx]
            ids = [scene_ids[i] for i in idx]
            loss = training_step(batch, store, schedule, tcfg, rng, scene_ids=ids)
            steps_run += 1
            wall_ms = (time.monotonic() - t0) * 1e3
            if store.step % cfg.train.log_every == 0 or store.step == tcfg.total_steps:
                log.write(json.dumps({"step": store.step, "loss": round(loss, 6),
                                      "lr": tcfg.lr, "wall_ms": round(wall_ms, 1)}) + "\n")
                log.flush()
            if not quiet and store.step % max(1, 10 * cfg.train.log_every) == 0:
                print(f"[{mode}] step {store.step}/{tcfg.total_steps} loss {loss:.4f}")
            if cfg.train.checkpoint_every and store.step % cfg.train.checkpoint_every == 0:
                save_checkpoint(store, out / f"ckpt_{mode}_{store.step:06d}.fstk",
                                rng_state=rng.state(), meta=meta)
    final = out / f"ckpt_{mode}_final.fstk"
    save_checkpoint(store, final, rng_state=rng.state(), meta=meta)
    return {"final_loss": loss, "final_checkpoint": str(final), "steps_run": steps_run,
            "store": store}
