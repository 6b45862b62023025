"""All-in-focus compositing and depth-of-field edits over stack subsets."""

from __future__ import annotations

import numpy as np

from ..core.image import FocalStack, Image
from .focus import FOCUS_WINDOW, IndexMap, depth_index_map


def _gather(arr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    h, w = idx.shape
    return arr[idx, np.arange(h)[:, None], np.arange(w)[None, :]]


def composite_aif(stack: FocalStack, index_map: IndexMap) -> Image:
    """Per-pixel gather frames[index[p]][p], with a 1-px feather at index seams."""
    if not stack.aligned:
        raise ValueError("composite_aif requires an aligned stack")
    idx = index_map.indices
    if idx.shape != (stack.frames[0].height, stack.frames[0].width):
        raise ValueError("index map dimensions do not match the stack")
    if idx.size and idx.max() >= len(stack):
        raise IndexError(f"index map references frame {idx.max()} of a {len(stack)}-frame stack")
    arr = stack.as_array().astype(np.float64)
    out = _gather(arr, idx)

    # 1-px feather: at seam pixels, average the gathers driven by the 3x3
    # neighborhood's indices (blends exactly one pixel across each seam)
    pad = np.pad(idx, 1, mode="edge")
    neigh = [pad[1 + dy:1 + dy + idx.shape[0], 1 + dx:1 + dx + idx.shape[1]]
             for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
    seam = np.zeros(idx.shape, dtype=bool)
    for n in neigh:
        seam |= n != idx
    if seam.any():
        blend = np.zeros_like(out)
        for n in neigh:
            blend += _gather(arr, n)
        blend /= len(neigh)
        out[seam] = blend[seam]
    return Image(np.clip(out, 0.0, 1.0).astype(np.float32))


def dof_edit(stack: FocalStack, indices, window: int = FOCUS_WINDOW) -> Image:
    """Composite restricted to a subset of focal positions (argmax over the subset only)."""
    subset = sorted(set(int(i) for i in indices))
    if not subset:
        raise ValueError("dof_edit needs a non-empty subset of frame indices")
    if subset[0] < 0 or subset[-1] >= len(stack):
        raise IndexError(f"subset {subset} outside [0, {len(stack)})")
    if not stack.aligned:
        raise ValueError("dof_edit requires an aligned stack")
    sub_map = depth_index_map([stack.frames[i] for i in subset], window)
    lookup = np.asarray(subset, dtype=np.int64)
    full_map = IndexMap(lookup[sub_map.indices], len(stack))
    return composite_aif(stack, full_map)
