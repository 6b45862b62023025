import json
from pathlib import Path

import numpy as np
import pytest

from refocuslab.core import (
    CorruptHeaderError,
    DepthMap,
    FocalStack,
    FocusSetting,
    Image,
    InvariantError,
    Rng,
    SchemaError,
    StackManifest,
    UnsupportedFormatError,
    load_image,
    read_manifest,
    read_tensor,
    save_image,
    tensor_from_bytes,
    tensor_to_bytes,
    write_manifest,
    write_tensor,
)

GOLDEN = Path(__file__).parent / "golden"


# ---------------------------------------------------------------------------
# Rng
# ---------------------------------------------------------------------------

def test_rng_golden_sequence():
    ref = json.loads((GOLDEN / "rng_reference.json").read_text())
    r = Rng(ref["seed"])
    assert [str(r.next_u64()) for _ in range(10)] == ref["u64"]
    uni = Rng(ref["seed"]).uniform((10,))
    assert np.allclose(uni, ref["uniform"], rtol=0, atol=0)
    nrm = Rng(ref["seed"]).normal((10,))
    assert np.allclose(nrm, ref["normal"], rtol=0, atol=0)


def test_rng_bulk_matches_scalar_draws():
    bulk = Rng(7).uniform((6,))
    r = Rng(7)
    singles = [r.uniform() for _ in range(6)]
    assert np.allclose(bulk, singles, atol=0)


def test_rng_split_streams_differ():
    base = Rng(11)
    a = base.split(0).uniform((100,))
    b = base.split(1).uniform((100,))
    assert not np.allclose(a, b)


def test_rng_state_roundtrip():
    r = Rng(5)
    r.uniform((3,))
    s = r.state()
    x = r.uniform((4,))
    y = Rng.from_state(s).uniform((4,))
    assert np.array_equal(x, y)


def test_rng_normal_moments():
    x = Rng(123).normal((200_000,))
    assert abs(x.mean()) < 0.01
    assert abs(x.std() - 1.0) < 0.01


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

def test_image_invariants():
    img = Image(np.full((4, 5, 3), 0.5, dtype=np.float32))
    assert (img.width, img.height, img.channels) == (5, 4, 3)
    with pytest.raises(InvariantError):
        Image(np.full((2, 2, 1), np.nan))
    with pytest.raises(InvariantError):
        Image(np.full((2, 2, 1), 1.5))
    with pytest.raises(InvariantError):
        Image(np.zeros((2, 2, 4)))


def test_depthmap_invariants():
    DepthMap(np.full((3, 3), 0.5))
    with pytest.raises(InvariantError):
        DepthMap(np.zeros((3, 3)))
    with pytest.raises(InvariantError):
        DepthMap(np.full((3, 3), np.inf))


def test_focal_stack_invariants():
    frames = [Image(np.zeros((4, 4, 1))) for _ in range(3)]
    settings = [FocusSetting(i, i * 0.1, 0.5 + i * 0.1) for i in range(3)]
    st = FocalStack(tuple(frames), tuple(settings))
    assert len(st) == 3
    assert st.shape == (3, 4, 4, 1)
    with pytest.raises(InvariantError):
        FocalStack((frames[0],), (settings[0],))  # F >= 2
    bad = [FocusSetting(0, 0.0, 0.5), FocusSetting(2, 0.2, 0.6), FocusSetting(1, 0.1, 0.7)]
    with pytest.raises(InvariantError):
        FocalStack(tuple(frames), tuple(bad))
    with pytest.raises(InvariantError):
        FocusSetting(0, 0.9, 1.0)  # value cap 0.8


# ---------------------------------------------------------------------------
# Image I/O
# ---------------------------------------------------------------------------

def test_load_ppm_full_scale_white(tmp_path):
    p = tmp_path / "white.ppm"
    p.write_bytes(b"P6\n2 2\n255\n" + bytes([255] * 12))
    img = load_image(p)
    assert img.channels == 3
    assert np.all(img.data == 1.0)


def test_load_16bit_png_exact_scaling(tmp_path):
    img = Image(np.array([[[32768 / 65535]]], dtype=np.float32))
    p = tmp_path / "one.png"
    save_image(img, p, bit_depth=16)
    back = load_image(p)
    assert back.data.shape == (1, 1, 1)
    assert abs(float(back.data[0, 0, 0]) - 32768 / 65535) < 1e-9
    assert abs(float(back.data[0, 0, 0]) - 0.50000763) < 1e-7


def test_save_quantization_rules(tmp_path):
    # 1.0 -> 255; 0.5 -> 128 (round half up); clamp below 0
    img = Image(np.array([[[1.0], [0.5], [0.0]]], dtype=np.float32))
    p = tmp_path / "q.png"
    save_image(img, p, bit_depth=8)
    raw = load_image(p).data * 255.0
    assert np.allclose(np.round(raw.ravel()), [255, 128, 0])


def test_png_8bit_roundtrip_byte_identical(tmp_path):
    rng = Rng(3)
    img = Image(rng.uniform((16, 12, 3)).astype(np.float32))
    p1 = tmp_path / "a.png"
    p2 = tmp_path / "b.png"
    save_image(img, p1, bit_depth=8)
    save_image(load_image(p1), p2, bit_depth=8)
    assert p1.read_bytes() == p2.read_bytes()


def test_png_16bit_roundtrip_half_step(tmp_path):
    rng = Rng(4)
    img = Image(rng.uniform((9, 7, 1)).astype(np.float32))
    p = tmp_path / "c.png"
    save_image(img, p, bit_depth=16)
    back = load_image(p)
    assert np.max(np.abs(back.data - img.data)) <= 0.5 / 65535 + 1e-7


def test_gray_stays_single_channel(tmp_path):
    img = Image(np.full((5, 5, 1), 0.25, dtype=np.float32))
    p = tmp_path / "g.png"
    save_image(img, p, bit_depth=8)
    assert load_image(p).channels == 1


def test_load_errors_are_distinct(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.png")
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"\x89PNG\r\n\x1a\n" + b"garbage")
    with pytest.raises(CorruptHeaderError):
        load_image(bad)
    # 1-bit PNG header: unsupported depth
    import struct, zlib
    ihdr = struct.pack(">IIBBBBB", 1, 1, 1, 0, 0, 0, 0)
    chunk = struct.pack(">I", len(ihdr)) + b"IHDR" + ihdr + struct.pack(">I", zlib.crc32(b"IHDR" + ihdr))
    depth1 = tmp_path / "depth1.png"
    depth1.write_bytes(b"\x89PNG\r\n\x1a\n" + chunk)
    with pytest.raises(UnsupportedFormatError):
        load_image(depth1)


def test_srgb_toggle_roundtrip(tmp_path):
    img = Image(np.linspace(0, 1, 32, dtype=np.float32).reshape(4, 8, 1))
    p = tmp_path / "s.png"
    save_image(img, p, bit_depth=16, srgb_encode=True)
    back = load_image(p, srgb_decode=True)
    assert np.max(np.abs(back.data - img.data)) < 2e-4


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def _manifest9():
    return StackManifest(
        scene_id="scene_0001",
        frame_paths=tuple(f"frame_{i:02d}.png" for i in range(9)),
        settings=tuple((i, i * 0.1) for i in range(9)),
        aligned=True,
        undistorted=True,
        provenance={"note": "synthetic"},
    )


def test_manifest_nine_frames_focus_values(tmp_path):
    m = _manifest9()
    p = tmp_path / "manifest.json"
    write_manifest(m, p)
    back = read_manifest(p)
    assert back.frame_count == 9
    assert [v for _, v in back.settings] == pytest.approx([i * 0.1 for i in range(9)])
    assert back.settings[-1][1] == pytest.approx(0.8)


def test_manifest_roundtrip_field_for_field(tmp_path):
    m = _manifest9()
    p = tmp_path / "m.json"
    write_manifest(m, p)
    back = read_manifest(p)
    assert back == m


def test_manifest_zero_frames_rejected(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text(json.dumps({"scene_id": "x", "frames": [], "aligned": False, "undistorted": False}))
    with pytest.raises(SchemaError) as e:
        read_manifest(p)
    assert "frames" in str(e.value)


def test_manifest_schema_error_names_field(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"scene_id": "x", "frames": [{"path": "a.png", "index": "zero", "value": 0.0}]}))
    with pytest.raises(SchemaError) as e:
        read_manifest(p)
    assert "index" in str(e.value)


# ---------------------------------------------------------------------------
# FSTK tensor blobs
# ---------------------------------------------------------------------------

def test_tensor_blob_roundtrip(tmp_path):
    arr = Rng(9).normal((3, 4, 5)).astype(np.float32)
    p = tmp_path / "t.fstk"
    write_tensor(arr, p)
    back = read_tensor(p)
    assert back.dtype == np.float32
    assert np.array_equal(back, arr.astype(np.float32))


def test_tensor_blob_header():
    blob = tensor_to_bytes(np.zeros((2, 3), dtype=np.float32))
    assert blob[:4] == b"FSTK"
    with pytest.raises(CorruptHeaderError):
        tensor_from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(CorruptHeaderError):
        tensor_from_bytes(blob[:-4])
