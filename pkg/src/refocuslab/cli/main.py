"""Single executable tying the lab together.

Subcommands: gen-data, process, train, sample, eval, serve.  Exit codes:
0 ok, 2 config error, 3 data error, 4 numeric failure.  Every artifact
embeds the resolved config hash, the seed, and a git-describe string, and
re-running a command with identical inputs reproduces identical output
hashes.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from ..core.image import Image, InvariantError
from ..core.io import ImageIOError, SchemaError, load_image, read_manifest, write_manifest
from ..diffusion import (
    MODE_POSITION,
    MODE_REPLICATED,
    NoiseSchedule,
    SamplerConfig,
    TRAIN_MODE_ABLATION,
    TRAIN_MODE_DIFFUSION,
    TRAIN_MODE_REGRESSION,
    regress_stack_batch,
    sample_stack_batch,
)
from ..metrics import EvalReport, eval_matrix
from ..nn import INPUT_COND_ONLY, checkpoint_hash, load_checkpoint
from ..nn.tensor import NumericError
from ..pipeline import (
    align_stack,
    composite_aif,
    depth_index_map,
    export_viewer_bundle,
    undistort,
)
from ..core.image import FocalStack, FocusSetting
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .data import (
    DataError,
    dataset_hash,
    generate_dataset,
    load_dataset,
    load_scene_stack,
    read_index,
)
from .serve import serve_forever
from .trainer import run_training, schedule_from_config


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, check=False)
        s = out.stdout.strip()
        return s if out.returncode == 0 and s else "nogit"
    except OSError:
        return "nogit"


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return apply_overrides(cfg, args.set or [])


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg.seed, "git": git_describe()}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = _load_cfg(args)
    index = generate_dataset(cfg, args.out_dir, args.count, provenance=_provenance(cfg))
    print(f"generated {index['count']} scenes in {args.out_dir}")
    print(f"dataset hash: {dataset_hash(args.out_dir)}")
    return 0


def _scene_stack_object(data_dir, sid: str):
    frames_arr, manifest = load_scene_stack(data_dir, sid)
    f = frames_arr.shape[0]
    frames = tuple(Image(frames_arr[i].transpose(1, 2, 0)) for i in range(f))
    settings = tuple(FocusSetting(i, v, 1.0) for i, v in manifest.settings)
    return FocalStack(frames, settings, aligned=manifest.aligned), manifest


def cmd_process(args) -> int:
    cfg = _load_cfg(args)
    index = read_index(args.in_dir)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from ..core.io import save_image, write_tensor
    from ..core.io import read_tensor
    processed_ids = []
    for sid in index["scenes"]:
        stack, manifest = _scene_stack_object(args.in_dir, sid)
        prov = dict(manifest.provenance)
        breathing = prov.get("breathing")
        undistorted = manifest.undistorted
        if args.undistort:
            if breathing is None:
                raise DataError(f"{sid}: no calibrated distortion profile in manifest")
            frames = [undistort(fr, breathing["k1"][i], breathing["k2"][i])
                      for i, fr in enumerate(stack.frames)]
            stack = stack.with_frames(frames)
            undistorted = True
        if args.align:
            if stack.aligned:
                raise DataError(f"{sid}: stack is already aligned")
            scales = None
            if breathing is not None and not args.estimate_scales:
                scales = breathing["magnification"]
            stack = align_stack(stack, scales=scales)
        if args.aif and not stack.aligned:
            raise DataError(
                f"{sid}: all-in-focus compositing requires an aligned stack "
                "(run --align first; the stages follow the capture pipeline order)")
        sdir = out / sid
        sdir.mkdir(exist_ok=True)
        paths = []
        for i, frame in enumerate(stack.frames):
            name = f"frame_{i:02d}.png"
            save_image(frame, sdir / name, bit_depth=16)
            paths.append(name)
        src = Path(args.in_dir) / sid
        if (src / "depth.fstk").exists():
            write_tensor(read_tensor(src / "depth.fstk"), sdir / "depth.fstk")
        if (src / "aif.png").exists():
            save_image(load_image(src / "aif.png"), sdir / "aif.png", bit_depth=16)
        if args.aif:
            idx_map = depth_index_map(stack)
            save_image(composite_aif(stack, idx_map), sdir / "aif_composite.png", bit_depth=16)
            save_image(Image((idx_map.indices / 255.0).astype(np.float32)[:, :, None]),
                       sdir / "index.png", bit_depth=8)
        prov["processing"] = {
            "undistort": bool(args.undistort), "align": bool(args.align), "aif": bool(args.aif),
            **_provenance(cfg),
        }
        new_manifest = type(manifest)(
            scene_id=sid, frame_paths=tuple(paths), settings=manifest.settings,
            aligned=stack.aligned, undistorted=undistorted, provenance=prov)
        write_manifest(new_manifest, sdir / "manifest.json")
        processed_ids.append(sid)
    new_index = dict(index)
    new_index["breathing"] = False
    new_index["provenance"] = {"processed_from": str(args.in_dir), **_provenance(cfg)}
    (out / "index.json").write_text(json.dumps(new_index, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")
    print(f"processed {len(processed_ids)} scenes into {args.out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    result = run_training(cfg, args.data_dir, args.ckpt_dir, args.mode,
                          resume=args.resume, provenance={"git": git_describe()},
                          quiet=args.quiet)
    print(f"trained {result['steps_run']} steps, final loss {result['final_loss']:.4f}")
    print(f"checkpoint: {result['final_checkpoint']}")
    print(f"checkpoint hash: {checkpoint_hash(result['final_checkpoint'])}")
    return 0


def _mode_of_store(store) -> str:
    if store.arch.input_kind == INPUT_COND_ONLY:
        return TRAIN_MODE_REGRESSION
    return TRAIN_MODE_ABLATION if store.arch.position_embed else TRAIN_MODE_DIFFUSION


def _sampler_from_args(args, meta, mode) -> SamplerConfig:
    defaults = meta.get("sampler", {})
    w = defaults.get("w", 1.5) if args.w is None else args.w
    steps = defaults.get("steps", 250) if args.steps is None else args.steps
    cond_mode = MODE_REPLICATED if mode == TRAIN_MODE_ABLATION else MODE_POSITION
    return SamplerConfig(w=w, steps=steps, seed=args.seed, mode=cond_mode,
                         ema=defaults.get("ema", True))


def _schedule_from_meta(meta) -> NoiseSchedule:
    train = meta.get("train", {})
    return NoiseSchedule.linear(train.get("t_steps", 1000), train.get("beta_start", 1e-4),
                                train.get("beta_end", 0.02))


def cmd_sample(args) -> int:
    store, _, meta = load_checkpoint(args.ckpt)
    mode = _mode_of_store(store)
    img = load_image(args.input)
    if img.channels != store.arch.channels:
        raise DataError(f"input has {img.channels} channels, model expects {store.arch.channels}")
    p = args.position
    if not (0 <= p < store.arch.frames):
        raise DataError(f"focal position {p} outside [0, {store.arch.frames})")
    scfg = _sampler_from_args(args, meta, mode)
    inputs = img.data.transpose(2, 0, 1)[None]
    if mode == TRAIN_MODE_REGRESSION:
        out = regress_stack_batch(inputs, p, store)[0]
        prov_mode = "regression"
    else:
        schedule = _schedule_from_meta(meta)
        out = sample_stack_batch(inputs, p, store, schedule, scfg)[0]
        prov_mode = scfg.mode
    frames = tuple(Image(out[i].transpose(1, 2, 0)) for i in range(out.shape[0]))
    settings = tuple(FocusSetting(i, i * 0.1, 1.0) for i in range(out.shape[0]))
    stack = FocalStack(frames, settings, aligned=True)
    idx_map = depth_index_map(stack)
    provenance = {
        "mode": prov_mode, "w": scfg.w, "steps": scfg.steps, "seed": scfg.seed,
        "ema": scfg.ema, "input": str(args.input), "input_position": p,
        "checkpoint": checkpoint_hash(args.ckpt), "trained": store.step > 0,
        "config_hash": meta.get("config_hash", ""), "git": git_describe(),
    }
    if store.step == 0:
        provenance["warning"] = "sampled from untrained parameters"
    manifest = export_viewer_bundle(stack, idx_map, args.out_dir,
                                    scene_id=Path(args.out_dir).name, provenance=provenance)
    print(f"wrote bundle {args.out_dir} ({manifest.frame_count} frames, mode={prov_mode}, "
          f"w={scfg.w}, steps={scfg.steps}, seed={scfg.seed})")
    return 0


def cmd_eval(args) -> int:
    store, _, meta = load_checkpoint(args.ckpt)
    mode = _mode_of_store(store)
    stacks, ids, _ = load_dataset(args.test_dir, limit=args.scenes)
    scenes = list(zip(ids, stacks))
    scfg = _sampler_from_args(args, meta, mode)

    if mode == TRAIN_MODE_REGRESSION:
        def sample_fn(inputs, p):
            return regress_stack_batch(inputs, p, store)
    else:
        schedule = _schedule_from_meta(meta)

        def sample_fn(inputs, p):
            cfg_p = SamplerConfig(w=scfg.w, steps=scfg.steps, seed=scfg.seed + p,
                                  mode=scfg.mode, ema=scfg.ema)
            return sample_stack_batch(inputs, p, store, schedule, cfg_p)

    report = eval_matrix(sample_fn, scenes, store.arch.frames, mode=mode, provenance={
        "checkpoint": checkpoint_hash(args.ckpt), "w": scfg.w, "steps": scfg.steps,
        "seed": scfg.seed, "config_hash": meta.get("config_hash", ""), "git": git_describe(),
        "scene_count": len(scenes),
    })
    report.save(args.report)
    mat = report.matrix("psnr")
    finite = mat[np.isfinite(mat)]
    print(f"evaluated {len(scenes)} scenes in mode {mode}; "
          f"mean finite PSNR {finite.mean():.2f} dB; report: {args.report}")
    return 0


def cmd_serve(args) -> int:
    if not Path(args.bundle_dir).is_dir():
        raise DataError(f"bundle directory not found: {args.bundle_dir}")
    serve_forever(args.bundle_dir, args.port)
    return 0


# ---------------------------------------------------------------------------
# argument parsing / error mapping
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="refocuslab",
                                 description="focal-stack refocusing laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run-config file (TOML-like; see README)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config value")

    p = sub.add_parser("gen-data", help="render a synthetic focal-stack dataset")
    common(p)
    p.add_argument("out_dir")
    p.add_argument("--count", type=int, default=100)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("process", help="undistort / align / composite a dataset")
    common(p)
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--undistort", action="store_true")
    p.add_argument("--align", action="store_true")
    p.add_argument("--aif", action="store_true")
    p.add_argument("--estimate-scales", action="store_true",
                   help="estimate alignment scales instead of using calibrated ones")
    p.set_defaults(fn=cmd_process)

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.add_argument("data_dir")
    p.add_argument("ckpt_dir")
    p.add_argument("--mode", choices=[TRAIN_MODE_DIFFUSION, TRAIN_MODE_ABLATION,
                                      TRAIN_MODE_REGRESSION],
                   default=TRAIN_MODE_DIFFUSION)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sample", help="generate a stack from one input frame")
    p.add_argument("ckpt")
    p.add_argument("input")
    p.add_argument("position", type=int)
    p.add_argument("out_dir")
    p.add_argument("--w", type=float, default=None, help="guidance weight (default 1.5)")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("eval", help="build the F x F refocusing report")
    p.add_argument("ckpt")
    p.add_argument("test_dir")
    p.add_argument("report")
    p.add_argument("--scenes", type=int, default=None)
    p.add_argument("--w", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="serve viewer bundles over HTTP")
    p.add_argument("bundle_dir")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, SchemaError, ImageIOError, InvariantError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
