"""Checkpoint container: FSTK tensor blobs behind a JSON index.

Layout: 8-byte magic, u32 header length, UTF-8 JSON header
{arch, step, version, rng_state, meta, index}, then the blob region.  Each
index entry holds the blob's byte offset (relative to the region start) and
length; blobs themselves are the core FSTK format.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..core.io import CorruptHeaderError, tensor_from_bytes, tensor_to_bytes
from .optim import ParamStore
from .unet import DenoiserArch

_MAGIC = b"FSTKCKPT"
_SECTIONS = ("p", "m", "v", "e")


def _collect(store: ParamStore) -> dict:
    groups = {"p": store.params, "m": store.m, "v": store.v, "e": store.ema}
    return {f"{tag}/{name}": arr for tag in _SECTIONS for name, arr in sorted(groups[tag].items())}


def save_checkpoint(store: ParamStore, path, rng_state: dict | None = None,
                    meta: dict | None = None) -> str:
    """Write the checkpoint; returns its sha256 content hash."""
    blobs = []
    index = {}
    offset = 0
    for name, arr in _collect(store).items():
        blob = tensor_to_bytes(np.asarray(arr, dtype=np.float32))
        index[name] = {"offset": offset, "length": len(blob), "dims": list(arr.shape)}
        blobs.append(blob)
        offset += len(blob)
    header = {
        "arch": store.arch.to_dict(),
        "step": store.step,
        "version": store.version,
        "rng_state": rng_state,
        "meta": meta or {},
        "index": index,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = _MAGIC + struct.pack("<I", len(hbytes)) + hbytes + b"".join(blobs)
    Path(path).write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def load_checkpoint(path):
    """Returns (ParamStore, rng_state, meta)."""
    buf = Path(path).read_bytes()
    if buf[:8] != _MAGIC:
        raise CorruptHeaderError(f"not a checkpoint file: {path}")
    (hlen,) = struct.unpack("<I", buf[8:12])
    header = json.loads(buf[12:12 + hlen].decode("utf-8"))
    region = buf[12 + hlen:]
    tensors = {}
    for name, entry in header["index"].items():
        blob = region[entry["offset"]:entry["offset"] + entry["length"]]
        tensors[name] = tensor_from_bytes(blob)
    arch = DenoiserArch.from_dict(header["arch"])
    sections = {tag: {} for tag in _SECTIONS}
    for full, arr in tensors.items():
        tag, name = full.split("/", 1)
        sections[tag][name] = arr
    store = ParamStore(
        arch=arch,
        params=sections["p"], m=sections["m"], v=sections["v"], ema=sections["e"],
        step=int(header["step"]), version=int(header["version"]),
    )
    return store, header.get("rng_state"), header.get("meta", {})


def checkpoint_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
