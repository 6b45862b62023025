import json
import urllib.request
from pathlib import Path

import numpy as np
import pytest

from refocuslab.cli import (
    ConfigError,
    RunConfig,
    apply_overrides,
    dataset_hash,
    load_dataset,
    parse_config_text,
    start_background,
)
from refocuslab.cli.main import main
from refocuslab.core import load_image, read_manifest
from refocuslab.metrics import EvalReport
from refocuslab.nn import checkpoint_hash, load_checkpoint


TOY_CONFIG = """
seed = 11
[scene]
width = 16
height = 16
layout = "two_plane"
texture = "noise"
[lens]
focus_count = 3
[train]
batch_size = 2
total_steps = 6
base_width = 8
depth = 2
time_dim = 16
t_steps = 100
beta_end = 0.1
checkpoint_every = 3
log_every = 1
[sampler]
steps = 8
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "toy.cfg"
    cfg_path.write_text(TOY_CONFIG)
    data_dir = root / "data"
    assert main(["gen-data", "--config", str(cfg_path), str(data_dir), "--count", "4"]) == 0
    return root, cfg_path, data_dir


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_config_defaults_and_sections():
    cfg = parse_config_text(TOY_CONFIG)
    assert cfg.seed == 11
    assert cfg.scene.width == 16
    assert cfg.lens.focus_count == 3
    assert cfg.train.batch_size == 2
    assert cfg.sampler.w == 1.5  # documented default


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        parse_config_text("[scene]\nnonsense = 3\n")
    with pytest.raises(ConfigError):
        parse_config_text("[warp]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("toplevel_mystery = 2\n")


def test_config_overrides():
    cfg = apply_overrides(RunConfig(), ["train.lr=0.001", "seed=5", 'scene.texture="smooth"'])
    assert cfg.train.lr == pytest.approx(0.001)
    assert cfg.seed == 5
    assert cfg.scene.texture == "smooth"
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), ["train.bogus=1"])


def test_config_hash_stable():
    a = parse_config_text(TOY_CONFIG).hash()
    b = parse_config_text(TOY_CONFIG).hash()
    assert a == b
    c = apply_overrides(parse_config_text(TOY_CONFIG), ["seed=999"]).hash()
    assert c != a


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------

def test_gen_data_dataset_layout(workspace):
    root, cfg_path, data_dir = workspace
    index = json.loads((data_dir / "index.json").read_text())
    assert index["count"] == 4
    assert index["frames"] == 3
    assert index["provenance"]["git"]
    stacks, ids, _ = load_dataset(data_dir)
    assert stacks.shape == (4, 3, 1, 16, 16)
    m = read_manifest(data_dir / ids[0] / "manifest.json")
    assert m.aligned and m.undistorted


def test_gen_data_empty_dataset(tmp_path):
    assert main(["gen-data", str(tmp_path / "empty"), "--count", "0"]) == 0
    index = json.loads((tmp_path / "empty" / "index.json").read_text())
    assert index["scenes"] == []


def test_gen_data_deterministic_hash(workspace, tmp_path):
    root, cfg_path, data_dir = workspace
    again = tmp_path / "again"
    assert main(["gen-data", "--config", str(cfg_path), str(again), "--count", "4"]) == 0
    assert dataset_hash(again) == dataset_hash(data_dir)


# ---------------------------------------------------------------------------
# process
# ---------------------------------------------------------------------------

def test_process_roundtrip_breathed_data(tmp_path):
    cfg = tmp_path / "b.cfg"
    cfg.write_text(TOY_CONFIG.replace("height = 16", "height = 16\n")
                   + "\n[breathing]\nenabled = true\n")
    raw = tmp_path / "raw"
    assert main(["gen-data", "--config", str(cfg), str(raw), "--count", "2"]) == 0
    index = json.loads((raw / "index.json").read_text())
    assert index["breathing"] is True
    out = tmp_path / "proc"
    assert main(["process", "--config", str(cfg), str(raw), str(out),
                 "--undistort", "--align", "--aif"]) == 0
    m = read_manifest(out / "scene_00000" / "manifest.json")
    assert m.aligned and m.undistorted
    assert (out / "scene_00000" / "aif_composite.png").exists()
    assert (out / "scene_00000" / "index.png").exists()


def test_process_ordering_error(tmp_path, workspace):
    root, cfg_path, data_dir = workspace
    cfg = tmp_path / "b2.cfg"
    cfg.write_text(TOY_CONFIG + "\n[breathing]\nenabled = true\n")
    raw = tmp_path / "raw2"
    assert main(["gen-data", "--config", str(cfg), str(raw), "--count", "1"]) == 0
    # aif before align on an unaligned stack is an ordering violation
    rc = main(["process", "--config", str(cfg), str(raw), str(tmp_path / "x"),
               "--undistort", "--aif"])
    assert rc == 3


def test_process_noop_on_clean_data(workspace, tmp_path):
    root, cfg_path, data_dir = workspace
    out = tmp_path / "clean_proc"
    assert main(["process", "--config", str(cfg_path), str(data_dir), str(out), "--aif"]) == 0
    a = load_image(data_dir / "scene_00000" / "frame_00.png")
    b = load_image(out / "scene_00000" / "frame_00.png")
    assert np.array_equal(a.data, b.data)


# ---------------------------------------------------------------------------
# train / sample / eval
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trained(workspace, tmp_path_factory):
    root, cfg_path, data_dir = workspace
    ckpt_dir = tmp_path_factory.mktemp("ckpt")
    rc = main(["train", "--config", str(cfg_path), str(data_dir), str(ckpt_dir),
               "--mode", "diffusion", "--quiet"])
    assert rc == 0
    return ckpt_dir / "ckpt_diffusion_final.fstk"


def test_train_smoke_artifacts(trained):
    ckpt_dir = trained.parent
    store, rng_state, meta = load_checkpoint(trained)
    assert store.step == 6
    assert meta["mode"] == "diffusion"
    log_lines = (ckpt_dir / "log_diffusion.jsonl").read_text().strip().splitlines()
    assert len(log_lines) == 6
    rec = json.loads(log_lines[0])
    assert set(rec) == {"step", "loss", "lr", "wall_ms"}
    assert (ckpt_dir / "ckpt_diffusion_000003.fstk").exists()


def test_train_resume_continues_counter(workspace, trained, tmp_path):
    root, cfg_path, data_dir = workspace
    out = tmp_path / "resumed"
    rc = main(["train", "--config", str(cfg_path), "--set", "train.total_steps=9",
               str(data_dir), str(out), "--mode", "diffusion", "--quiet",
               "--resume", str(trained)])
    assert rc == 0
    store, _, _ = load_checkpoint(out / "ckpt_diffusion_final.fstk")
    assert store.step == 9


def test_train_determinism_checkpoint_hash(workspace, tmp_path):
    root, cfg_path, data_dir = workspace
    hashes = []
    for name in ("t1", "t2"):
        out = tmp_path / name
        rc = main(["train", "--config", str(cfg_path), str(data_dir), str(out),
                   "--mode", "regression", "--quiet"])
        assert rc == 0
        hashes.append(checkpoint_hash(out / "ckpt_regression_final.fstk"))
    assert hashes[0] == hashes[1]


def test_sample_writes_bundle_with_provenance(workspace, trained, tmp_path):
    root, cfg_path, data_dir = workspace
    src = data_dir / "scene_00000" / "frame_01.png"
    out = tmp_path / "bundle"
    rc = main(["sample", str(trained), str(src), "1", str(out), "--seed", "3"])
    assert rc == 0
    m = read_manifest(out / "manifest.json")
    extra = m.provenance
    assert extra["w"] == 1.5  # paper default recorded
    assert extra["seed"] == 3
    assert extra["mode"] == "position_dependent"
    assert extra["checkpoint"]
    files = sorted(p.name for p in out.iterdir())
    assert "index.png" in files and "manifest.json" in files
    assert sum(1 for f in files if f.startswith("frame_")) == 3


def test_sample_w0_matches_conditional_only(workspace, trained, tmp_path):
    root, cfg_path, data_dir = workspace
    src = data_dir / "scene_00001" / "frame_00.png"
    a = tmp_path / "w0a"
    b = tmp_path / "w0b"
    assert main(["sample", str(trained), str(src), "0", str(a), "--w", "0", "--seed", "5"]) == 0
    assert main(["sample", str(trained), str(src), "0", str(b), "--w", "0", "--seed", "5"]) == 0
    for k in range(3):
        fa = (a / f"frame_{k:02d}.png").read_bytes()
        fb = (b / f"frame_{k:02d}.png").read_bytes()
        assert fa == fb


def test_eval_report_shape_and_determinism(workspace, trained, tmp_path):
    root, cfg_path, data_dir = workspace
    r1 = tmp_path / "r1.json"
    r2 = tmp_path / "r2.json"
    for r in (r1, r2):
        rc = main(["eval", str(trained), str(data_dir), str(r),
                   "--scenes", "2", "--steps", "5", "--seed", "2"])
        assert rc == 0
    assert r1.read_bytes() == r2.read_bytes()
    report = EvalReport.load(r1)
    assert report.frame_count == 3
    assert report.scene_count == 2
    assert (tmp_path / "r1_psnr.csv").exists()


def test_exit_codes(tmp_path):
    assert main(["gen-data", "--config", str(tmp_path / "missing.cfg"), str(tmp_path / "d")]) == 2
    assert main(["train", str(tmp_path / "nodata"), str(tmp_path / "ck")]) == 3


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

def _get(url):
    with urllib.request.urlopen(url) as r:
        return r.status, r.read(), dict(r.headers)


def test_serve_endpoints(workspace, trained, tmp_path):
    root, cfg_path, data_dir = workspace
    bundles = tmp_path / "bundles"
    src = data_dir / "scene_00000" / "frame_00.png"
    assert main(["sample", str(trained), str(src), "0", str(bundles / "demo"),
                 "--steps", "4"]) == 0
    server, base = start_background(bundles)
    try:
        code, body, headers = _get(f"{base}/bundles")
        assert code == 200
        assert json.loads(body) == {"bundles": ["demo"]}
        assert headers["Access-Control-Allow-Origin"] == "*"
        code, body, _ = _get(f"{base}/bundles/demo/manifest.json")
        assert code == 200
        assert json.loads(body)["scene_id"] == "demo"
        code, body, _ = _get(f"{base}/bundles/demo/frame_00.png")
        assert code == 200 and body[:8] == b"\x89PNG\r\n\x1a\n"
        with pytest.raises(urllib.error.HTTPError) as err:
            _get(f"{base}/bundles/nonexistent/manifest.json")
        assert err.value.code == 404
    finally:
        server.shutdown()
