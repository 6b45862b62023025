"""Synthetic dataset directories: generation, indexing, loading.

Layout: out_dir/index.json plus one scene_{i:05d}/ directory per scene
holding frame_{k:02d}.png, aif.png, depth.fstk, and manifest.json.  When
breathing simulation is enabled the stored frames are degraded and the
manifest's provenance records the per-frame profile (the stand-in for the
paper's calibrated per-focus-setting coefficients).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..core.image import FocalStack, StackManifest
from ..core.io import load_image, read_manifest, save_image, write_manifest, write_tensor
from ..render import (
    BreathingProfile,
    LensConfig,
    SceneSpec,
    default_breathing_profile,
    focus_distances_inverse_linear,
    gen_scene,
    render_stack,
    simulate_breathing,
)
from .config import RunConfig


class DataError(ValueError):
    pass


def lens_from_config(cfg: RunConfig) -> LensConfig:
    return LensConfig(
        focal_length=cfg.lens.focal_length,
        f_number=cfg.lens.f_number,
        sensor_width=cfg.lens.sensor_width,
        image_width=cfg.scene.width,
        focus_distances=focus_distances_inverse_linear(
            cfg.lens.z_near, cfg.lens.z_far, cfg.lens.focus_count),
    )


def scene_spec_from_config(cfg: RunConfig, seed: int) -> SceneSpec:
    return SceneSpec(
        layout=cfg.scene.layout,
        texture=cfg.scene.texture,
        depth_range=(cfg.scene.depth_near, cfg.scene.depth_far),
        seed=seed,
        width=cfg.scene.width,
        height=cfg.scene.height,
        channels=cfg.scene.channels,
    )


def generate_dataset(cfg: RunConfig, out_dir, count: int, provenance: dict | None = None) -> dict:
    """Render `count` stacks (+ AiF and depth ground truth); returns the index doc."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lens = lens_from_config(cfg)
    profile = None
    if cfg.breathing.enabled:
        profile = default_breathing_profile(
            cfg.lens.focus_count, cfg.breathing.mag_span,
            cfg.breathing.k1_max, cfg.breathing.k2_max)
    scene_ids = []
    for i in range(count):
        sid = f"scene_{i:05d}"
        sdir = out / sid
        sdir.mkdir(exist_ok=True)
        aif, depth = gen_scene(scene_spec_from_config(cfg, cfg.seed + i))
        stack = render_stack(aif, depth, lens)
        prov: dict = {"scene_seed": cfg.seed + i}
        if profile is not None:
            stack = simulate_breathing(stack, profile)
            prov["breathing"] = {
                "magnification": list(profile.magnification),
                "k1": list(profile.k1),
                "k2": list(profile.k2),
            }
        paths = []
        for k, frame in enumerate(stack.frames):
            name = f"frame_{k:02d}.png"
            save_image(frame, sdir / name, bit_depth=16)
            paths.append(name)
        save_image(aif, sdir / "aif.png", bit_depth=16)
        write_tensor(depth.depth, sdir / "depth.fstk")
        manifest = StackManifest(
            scene_id=sid,
            frame_paths=tuple(paths),
            settings=tuple((s.index, s.value) for s in stack.settings),
            aligned=stack.aligned,
            undistorted=profile is None,
            provenance=prov,
        )
        write_manifest(manifest, sdir / "manifest.json")
        scene_ids.append(sid)
    index = {
        "scenes": scene_ids,
        "count": count,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "frames": cfg.lens.focus_count,
        "resolution": [cfg.scene.height, cfg.scene.width],
        "channels": cfg.scene.channels,
        "breathing": cfg.breathing.enabled,
    }
    if provenance:
        index["provenance"] = provenance
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")
    return index


def read_index(data_dir) -> dict:
    p = Path(data_dir) / "index.json"
    if not p.exists():
        raise DataError(f"dataset index not found: {p}")
    return json.loads(p.read_text(encoding="utf-8"))


def load_scene_stack(data_dir, scene_id: str):
    """(frames (F, C, H, W) float32 in [0,1], manifest) for one scene."""
    sdir = Path(data_dir) / scene_id
    manifest = read_manifest(sdir / "manifest.json")
    frames = [load_image(sdir / p).data.transpose(2, 0, 1) for p in manifest.frame_paths]
    return np.stack(frames, axis=0).astype(np.float32), manifest


def load_dataset(data_dir, limit: int | None = None):
    """(stacks (S, F, C, H, W), scene_ids, index) for a generated dataset."""
    index = read_index(data_dir)
    ids = index["scenes"][:limit] if limit else index["scenes"]
    if not ids:
        raise DataError(f"dataset at {data_dir} lists no scenes")
    stacks = []
    for sid in ids:
        frames, _ = load_scene_stack(data_dir, sid)
        stacks.append(frames)
    return np.stack(stacks, axis=0), list(ids), index


def dataset_hash(data_dir) -> str:
    """Order-independent content hash over every file in the dataset tree."""
    root = Path(data_dir)
    digest = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            digest.update(p.relative_to(root).as_posix().encode())
            digest.update(hashlib.sha256(p.read_bytes()).digest())
    return digest.hexdigest()
