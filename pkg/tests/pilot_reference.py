"""Pilot run for the end-to-end criteria: trains the three models at reduced
budget and prints the comparative statistics the acceptance gate needs.
Invoke manually: python tests/pilot_reference.py /tmp/pilot [train_steps]."""

import json
import sys
import time
from pathlib import Path

import numpy as np

from refocuslab.cli import RunConfig, apply_overrides, generate_dataset, load_dataset
from refocuslab.cli.trainer import run_training, schedule_from_config
from refocuslab.diffusion import SamplerConfig, regress_stack_batch, sample_stack_batch
from refocuslab.metrics import collapse_stats, eval_matrix
from refocuslab.nn import load_checkpoint


def run_pilot(root: Path, train_steps: int, n_train=300, n_test=10, sampler_steps=100,
              width=16, seed=100):
    root.mkdir(parents=True, exist_ok=True)
    overrides = [f"seed={seed}", f"train.total_steps={train_steps}",
                 f"train.base_width={width}", "train.checkpoint_every=0",
                 "train.log_every=50"]
    cfg = apply_overrides(RunConfig(), overrides)
    test_cfg = apply_overrides(RunConfig(), overrides[:1] + [f"seed={seed + 1_000_000}"])

    t0 = time.time()
    if not (root / "train" / "index.json").exists():
        generate_dataset(cfg, root / "train", n_train)
        generate_dataset(test_cfg, root / "test", n_test)
    print(f"[pilot] datasets ready ({time.time()-t0:.0f}s)")

    stores = {}
    for mode in ("diffusion", "ablation", "regression"):
        t0 = time.time()
        final = root / "ckpt" / f"ckpt_{mode}_final.fstk"
        if final.exists():
            stores[mode], _, _ = load_checkpoint(final)
            print(f"[pilot] {mode}: reused checkpoint at step {stores[mode].step}")
            continue
        result = run_training(cfg, root / "train", root / "ckpt", mode, quiet=True)
        stores[mode] = result["store"]
        print(f"[pilot] {mode}: {result['steps_run']} steps, "
              f"final loss {result['final_loss']:.4f} ({time.time()-t0:.0f}s)")

    stacks, ids, _ = load_dataset(root / "test")
    scenes = list(zip(ids, stacks))
    schedule = schedule_from_config(cfg)
    f = stacks.shape[1]

    def diff_fn(inputs, p):
        return sample_stack_batch(inputs, p, stores["diffusion"], schedule,
                                  SamplerConfig(w=1.5, steps=sampler_steps, seed=7 + p))

    def reg_fn(inputs, p):
        return regress_stack_batch(inputs, p, stores["regression"])

    t0 = time.time()
    rep_d = eval_matrix(diff_fn, scenes, f, "diffusion")
    rep_r = eval_matrix(reg_fn, scenes, f, "regression")
    print(f"[pilot] eval matrices built ({time.time()-t0:.0f}s)")

    far = np.abs(np.arange(f)[:, None] - np.arange(f)[None, :]) >= 3
    ident = np.eye(f, dtype=bool)

    psnr_d = rep_d.values["psnr"]
    psnr_r = rep_r.values["psnr"]
    psnr_copy = rep_d.values["psnr_copy_input"]
    hf_d = rep_d.values["hf_out"]
    hf_r = rep_r.values["hf_out"]

    gain = (psnr_d - psnr_copy)[:, far].mean()
    print(f"(a) far-cell PSNR gain over copy-input: {gain:+.2f} dB (need >= +3)")
    hf_wins = (hf_d[:, far].mean(axis=1) > hf_r[:, far].mean(axis=1)).mean()
    print(f"(b) diffusion hf beats regression on {hf_wins:.0%} of scenes (need >= 70%)")
    idd = psnr_d[:, ident].mean()
    idr = np.where(np.isinf(psnr_r[:, ident]), 60.0, psnr_r[:, ident]).mean()
    print(f"(c) identity-cell PSNR: regression {idr:.2f} vs diffusion {idd:.2f} (reg must win)")

    t0 = time.time()
    p_abl = 2
    out_d = diff_fn(stacks[:, p_abl], p_abl)
    abl_cfg = SamplerConfig(w=1.5, steps=sampler_steps, seed=7, mode="replicated")
    out_a = sample_stack_batch(stacks[:, p_abl], p_abl, stores["ablation"], schedule, abl_cfg)
    cs_d = collapse_stats(out_d, stacks)
    cs_a = collapse_stats(out_a, stacks)
    print(f"[pilot] ablation sampling ({time.time()-t0:.0f}s)")
    print(f"(d) pairwise-diff ratio: diffusion {cs_d['diff_ratio'].mean():.2f} (need > 0.60), "
          f"ablation {cs_a['diff_ratio'].mean():.2f} (need < 0.25)")
    print(f"(e) profile corr: diffusion {cs_d['profile_corr'].mean():.2f} (need > 0.5), "
          f"ablation {cs_a['profile_corr'].mean():.2f} (need < 0.2)")
    summary = {
        "gain_far_db": float(gain), "hf_win_frac": float(hf_wins),
        "psnr_identity_reg": float(idr), "psnr_identity_diff": float(idd),
        "ratio_diffusion": float(cs_d["diff_ratio"].mean()),
        "ratio_ablation": float(cs_a["diff_ratio"].mean()),
        "corr_diffusion": float(cs_d["profile_corr"].mean()),
        "corr_ablation": float(cs_a["profile_corr"].mean()),
    }
    (root / "pilot_summary.json").write_text(json.dumps(summary, indent=2))
    return summary


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("/tmp/pilot")
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 800
    run_pilot(out, steps)
