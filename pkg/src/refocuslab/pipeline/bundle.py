"""Viewer bundle export: frames + manifest + index map in one directory.

Layout: out_dir/{manifest.json, frame_00.png ... frame_{F-1}.png, index.png}.
index.png stores frame indices directly as 8-bit pixel values, so its max
value is F-1.  The manifest extends the core schema with
{"index_map": "index.png", "viewer_version": 1}.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core.image import FocalStack, Image, StackManifest
from ..core.io import load_image, read_manifest, save_image, write_manifest
from .focus import IndexMap

VIEWER_VERSION = 1


def export_viewer_bundle(stack: FocalStack, index_map: IndexMap, out_dir,
                         scene_id: str = "bundle", provenance: dict | None = None) -> StackManifest:
    if not stack.aligned:
        raise ValueError("export_viewer_bundle requires an aligned stack")
    if index_map.frame_count != len(stack):
        raise ValueError("index map frame count does not match the stack")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(stack.frames):
        name = f"frame_{i:02d}.png"
        save_image(frame, out / name, bit_depth=8)
        paths.append(name)
    save_image(Image((index_map.indices / 255.0).astype(np.float32)[:, :, None]), out / "index.png", bit_depth=8)
    prov = dict(provenance or {})
    prov["_extra"] = {"index_map": "index.png", "viewer_version": VIEWER_VERSION}
    manifest = StackManifest(
        scene_id=scene_id,
        frame_paths=tuple(paths),
        settings=tuple((s.index, s.value) for s in stack.settings),
        aligned=True,
        undistorted=True,
        provenance=prov,
    )
    write_manifest(manifest, out / "manifest.json")
    return manifest


def load_viewer_bundle(bundle_dir):
    """Re-import a bundle: (frames as float arrays (F,H,W,C), index array, manifest)."""
    d = Path(bundle_dir)
    manifest = read_manifest(d / "manifest.json")
    frames = [load_image(d / p).data for p in manifest.frame_paths]
    index_name = manifest.provenance.get("_extra", {}).get("index_map", "index.png")
    idx_img = load_image(d / index_name)
    indices = np.round(idx_img.data[:, :, 0] * 255.0).astype(np.int64)
    return np.stack(frames, axis=0), indices, manifest
