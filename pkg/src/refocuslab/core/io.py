"""File I/O: PNG/PPM images, stack manifests, and "FSTK" tensor blobs.

The PNG codec is deliberately minimal (8/16-bit, gray/RGB, non-interlaced)
and canonical on write: fixed scanline filter and zlib level, so saving the
same pixel values always produces the same bytes.  Pillow was rejected here
because it cannot write 16-bit RGB PNGs; everything needed fits in zlib +
struct.

Quantization rule on save: clamp to [0, 1], then round half-up
(floor(v * maxval + 0.5)).  Loading divides by the file's maxval, so a
16-bit save/load round trip moves no value by more than half a
quantization step.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .image import Image, StackManifest


class ImageIOError(Exception):
    """Base class for image decode/encode failures."""


class CorruptHeaderError(ImageIOError):
    pass


class UnsupportedFormatError(ImageIOError):
    pass


class SchemaError(ValueError):
    """Manifest document violates the schema; message names the field."""


_PNG_SIG = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6  # fixed for canonical output


# ---------------------------------------------------------------------------
# sRGB transfer curve (flag-controlled; pixel domain is linear-light)
# ---------------------------------------------------------------------------

def srgb_to_linear(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float32)
    lo = v / 12.92
    hi = ((v + 0.055) / 1.055) ** 2.4
    return np.where(v <= 0.04045, lo, hi).astype(np.float32)


def linear_to_srgb(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float32)
    lo = v * 12.92
    hi = 1.055 * np.power(np.maximum(v, 1e-12), 1.0 / 2.4) - 0.055
    return np.where(v <= 0.0031308, lo, hi).astype(np.float32)


# ---------------------------------------------------------------------------
# PNG
# ---------------------------------------------------------------------------

def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", zlib.crc32(tag + payload))


def _encode_png(raw: np.ndarray, bit_depth: int) -> bytes:
    """raw: (H, W, C) uint8 or uint16 -> canonical PNG bytes."""
    h, w, c = raw.shape
    color_type = 0 if c == 1 else 2
    if bit_depth == 8:
        payload = raw.astype(np.uint8)
    else:
        payload = raw.astype(">u2")  # PNG sample order is big-endian
    rows = payload.reshape(h, -1).view(np.uint8).reshape(h, -1)
    scan = b"".join(b"\x00" + rows[y].tobytes() for y in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, bit_depth, color_type, 0, 0, 0)
    idat = zlib.compress(scan, _ZLIB_LEVEL)
    return _PNG_SIG + _png_chunk(b"IHDR", ihdr) + _png_chunk(b"IDAT", idat) + _png_chunk(b"IEND", b"")


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _unfilter(scan: bytes, h: int, stride: int, bpp: int) -> bytearray:
    out = bytearray(h * stride)
    pos = 0
    for y in range(h):
        ftype = scan[pos]
        pos += 1
        row = bytearray(scan[pos:pos + stride])
        pos += stride
        prev = out[(y - 1) * stride: y * stride] if y > 0 else bytes(stride)
        if ftype == 0:
            pass
        elif ftype == 1:  # Sub
            for i in range(bpp, stride):
                row[i] = (row[i] + row[i - bpp]) & 0xFF
        elif ftype == 2:  # Up
            for i in range(stride):
                row[i] = (row[i] + prev[i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                left = row[i - bpp] if i >= bpp else 0
                row[i] = (row[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                left = row[i - bpp] if i >= bpp else 0
                ul = prev[i - bpp] if i >= bpp else 0
                row[i] = (row[i] + _paeth(left, prev[i], ul)) & 0xFF
        else:
            raise CorruptHeaderError(f"PNG: unknown scanline filter {ftype}")
        out[y * stride:(y + 1) * stride] = row
    return out


def _decode_png(buf: bytes):
    if len(buf) < 8 or buf[:8] != _PNG_SIG:
        raise CorruptHeaderError("PNG: bad signature")
    pos = 8
    ihdr = None
    idat = b""
    while pos + 8 <= len(buf):
        (length,) = struct.unpack(">I", buf[pos:pos + 4])
        tag = buf[pos + 4:pos + 8]
        data = buf[pos + 8:pos + 8 + length]
        if len(data) != length:
            raise CorruptHeaderError("PNG: truncated chunk")
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = data
        elif tag == b"IDAT":
            idat += data
        elif tag == b"IEND":
            break
    if ihdr is None or len(ihdr) != 13:
        raise CorruptHeaderError("PNG: missing or malformed IHDR")
    w, h, depth, color_type, comp, filt, interlace = struct.unpack(">IIBBBBB", ihdr)
    if depth not in (8, 16):
        raise UnsupportedFormatError(f"PNG: unsupported bit depth {depth} (need 8 or 16)")
    if color_type not in (0, 2):
        raise UnsupportedFormatError(f"PNG: unsupported color type {color_type} (need gray or RGB)")
    if comp != 0 or filt != 0 or interlace != 0:
        raise UnsupportedFormatError("PNG: unsupported compression/filter/interlace method")
    channels = 1 if color_type == 0 else 3
    try:
        scan = zlib.decompress(idat)
    except zlib.error as e:
        raise CorruptHeaderError(f"PNG: IDAT inflate failed ({e})") from e
    bpp = channels * (depth // 8)
    stride = w * bpp
    if len(scan) != h * (stride + 1):
        raise CorruptHeaderError("PNG: scanline data has wrong length")
    raw = _unfilter(scan, h, stride, bpp)
    if depth == 8:
        arr = np.frombuffer(bytes(raw), dtype=np.uint8).reshape(h, w, channels)
        maxval = 255
    else:
        arr = np.frombuffer(bytes(raw), dtype=">u2").reshape(h, w, channels).astype(np.uint16)
        maxval = 65535
    return arr, maxval


# ---------------------------------------------------------------------------
# PPM / PGM (binary P5/P6, maxval 255 or 65535)
# ---------------------------------------------------------------------------

def _read_ppm_token(buf: bytes, pos: int):
    while pos < len(buf):
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < len(buf) and buf[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(buf) and not buf[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise CorruptHeaderError("PPM: truncated header")
    return buf[start:pos], pos


def _decode_ppm(buf: bytes):
    if buf[:2] not in (b"P5", b"P6"):
        raise UnsupportedFormatError("PPM: only binary P5/P6 supported")
    channels = 1 if buf[:2] == b"P5" else 3
    pos = 2
    try:
        wtok, pos = _read_ppm_token(buf, pos)
        htok, pos = _read_ppm_token(buf, pos)
        mtok, pos = _read_ppm_token(buf, pos)
        w, h, maxval = int(wtok), int(htok), int(mtok)
    except ValueError as e:
        raise CorruptHeaderError(f"PPM: non-numeric header field ({e})") from e
    if maxval not in (255, 65535):
        raise UnsupportedFormatError(f"PPM: unsupported maxval {maxval} (need 255 or 65535)")
    pos += 1  # single whitespace byte after maxval
    dtype = np.uint8 if maxval == 255 else np.dtype(">u2")
    need = w * h * channels * dtype.itemsize if maxval == 65535 else w * h * channels
    data = buf[pos:pos + need]
    if len(data) != need:
        raise CorruptHeaderError("PPM: pixel data truncated")
    arr = np.frombuffer(data, dtype=dtype).reshape(h, w, channels)
    return arr.astype(np.uint16) if maxval == 65535 else arr, maxval


def _encode_ppm(raw: np.ndarray, bit_depth: int) -> bytes:
    h, w, c = raw.shape
    magic = b"P5" if c == 1 else b"P6"
    maxval = 255 if bit_depth == 8 else 65535
    header = magic + b"\n%d %d\n%d\n" % (w, h, maxval)
    payload = raw.astype(np.uint8) if bit_depth == 8 else raw.astype(">u2")
    return header + payload.tobytes()


# ---------------------------------------------------------------------------
# Public image API
# ---------------------------------------------------------------------------

def load_image(path, srgb_decode: bool = False) -> Image:
    """Load an 8/16-bit PNG or PPM as an Image scaled to [0, 1].

    `srgb_decode=True` applies the sRGB->linear transfer after scaling (the
    stored pixel domain is linear light; display-referred files need the
    flag).  Channel count is preserved: gray files stay single-channel.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"image file not found: {p}")
    buf = p.read_bytes()
    if buf[:8] == _PNG_SIG:
        arr, maxval = _decode_png(buf)
    elif buf[:2] in (b"P5", b"P6"):
        arr, maxval = _decode_ppm(buf)
    else:
        raise UnsupportedFormatError(f"not a PNG or binary PPM file: {p}")
    vals = arr.astype(np.float32) / np.float32(maxval)
    if srgb_decode:
        vals = srgb_to_linear(vals)
    return Image(vals)


def save_image(image: Image, path, bit_depth: int = 8, srgb_encode: bool = False) -> None:
    """Write an Image as PNG or PPM (by extension), clamped and quantized round-half-up."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    p = Path(path)
    vals = image.data
    if srgb_encode:
        vals = linear_to_srgb(vals)
    maxval = 255 if bit_depth == 8 else 65535
    q = np.floor(np.clip(vals, 0.0, 1.0).astype(np.float64) * maxval + 0.5).astype(np.uint16 if bit_depth == 16 else np.uint8)
    suffix = p.suffix.lower()
    if suffix in (".ppm", ".pgm"):
        blob = _encode_ppm(q, bit_depth)
    elif suffix == ".png":
        blob = _encode_png(q, bit_depth)
    else:
        raise UnsupportedFormatError(f"unsupported output extension: {suffix} (use .png/.ppm/.pgm)")
    try:
        p.write_bytes(blob)
    except OSError as e:
        raise ImageIOError(f"cannot write {p}: {e}") from e


# ---------------------------------------------------------------------------
# Stack manifests (UTF-8 JSON)
# ---------------------------------------------------------------------------

_MANIFEST_KEYS = {"scene_id", "frames", "aligned", "undistorted", "provenance"}


def manifest_to_dict(m: StackManifest) -> dict:
    doc = {
        "scene_id": m.scene_id,
        "frames": [
            {"path": str(path), "index": int(idx), "value": float(val)}
            for path, (idx, val) in zip(m.frame_paths, m.settings)
        ],
        "aligned": bool(m.aligned),
        "undistorted": bool(m.undistorted),
    }
    prov = dict(m.provenance)
    extra = prov.pop("_extra", {})
    if prov:
        doc["provenance"] = prov
    doc.update(extra)
    return doc


def manifest_from_dict(doc: dict) -> StackManifest:
    if not isinstance(doc, dict):
        raise SchemaError("manifest: document must be a JSON object")
    if "scene_id" not in doc or not isinstance(doc["scene_id"], str):
        raise SchemaError("manifest: missing or non-string field 'scene_id'")
    frames = doc.get("frames")
    if not isinstance(frames, list) or len(frames) == 0:
        raise SchemaError("manifest: field 'frames' must be a non-empty list")
    paths, settings = [], []
    for i, fr in enumerate(frames):
        if not isinstance(fr, dict):
            raise SchemaError(f"manifest: frames[{i}] must be an object")
        for key, kind in (("path", str), ("index", (int,)), ("value", (int, float))):
            if key not in fr or not isinstance(fr[key], kind if isinstance(kind, tuple) else kind):
                raise SchemaError(f"manifest: frames[{i}].{key} missing or wrong type")
        paths.append(fr["path"])
        settings.append((int(fr["index"]), float(fr["value"])))
    for key in ("aligned", "undistorted"):
        if key in doc and not isinstance(doc[key], bool):
            raise SchemaError(f"manifest: field '{key}' must be boolean")
    prov = dict(doc.get("provenance", {}))
    extra = {k: v for k, v in doc.items() if k not in _MANIFEST_KEYS}
    if extra:
        prov["_extra"] = extra
    return StackManifest(
        scene_id=doc["scene_id"],
        frame_paths=tuple(paths),
        settings=tuple(settings),
        aligned=bool(doc.get("aligned", False)),
        undistorted=bool(doc.get("undistorted", False)),
        provenance=prov,
    )


def read_manifest(path) -> StackManifest:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"manifest not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"manifest: invalid JSON ({e})") from e
    return manifest_from_dict(doc)


def write_manifest(manifest: StackManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# FSTK tensor blobs: magic "FSTK", u32 version, u32 rank, u32 dims..., f32 LE
# ---------------------------------------------------------------------------

_FSTK_MAGIC = b"FSTK"
_FSTK_VERSION = 1


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    a = np.ascontiguousarray(arr, dtype="<f4")
    if a.ndim < 1 or a.ndim > 4:
        raise ValueError(f"FSTK tensors are rank 1..4, got rank {a.ndim}")
    head = _FSTK_MAGIC + struct.pack("<II", _FSTK_VERSION, a.ndim)
    head += struct.pack(f"<{a.ndim}I", *a.shape)
    return head + a.tobytes()


def tensor_from_bytes(buf: bytes) -> np.ndarray:
    if buf[:4] != _FSTK_MAGIC:
        raise CorruptHeaderError("FSTK: bad magic")
    version, rank = struct.unpack("<II", buf[4:12])
    if version != _FSTK_VERSION:
        raise UnsupportedFormatError(f"FSTK: unsupported version {version}")
    if not (1 <= rank <= 4):
        raise CorruptHeaderError(f"FSTK: bad rank {rank}")
    dims = struct.unpack(f"<{rank}I", buf[12:12 + 4 * rank])
    n = int(np.prod(dims))
    payload = buf[12 + 4 * rank:]
    if len(payload) != 4 * n:
        raise CorruptHeaderError("FSTK: payload length mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def write_tensor(arr: np.ndarray, path) -> None:
    Path(path).write_bytes(tensor_to_bytes(arr))


def read_tensor(path) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"tensor blob not found: {p}")
    return tensor_from_bytes(p.read_bytes())
