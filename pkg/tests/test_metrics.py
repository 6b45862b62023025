import math

import numpy as np
import pytest
from scipy import ndimage

from refocuslab.core import Image, Rng
from refocuslab.metrics import PSNR_EXACT, hf_energy, patch_stat_distance, psnr, ssim
from refocuslab.render import SceneSpec, gen_scene


# ---------------------------------------------------------------------------
# psnr
# ---------------------------------------------------------------------------

def test_psnr_exact_match_sentinel():
    img = Rng(1).uniform((8, 8)).astype(np.float32)
    assert psnr(img, img) == PSNR_EXACT
    assert math.isinf(PSNR_EXACT)


def test_psnr_hand_value():
    a = np.zeros((10, 10), dtype=np.float32)
    b = np.full((10, 10), 0.1, dtype=np.float32)
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-4)


def test_psnr_symmetric():
    rng = Rng(2)
    a = rng.uniform((12, 12))
    b = rng.uniform((12, 12))
    assert psnr(a, b) == pytest.approx(psnr(b, a), rel=1e-12)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((3, 3)), np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# ssim
# ---------------------------------------------------------------------------

def test_ssim_identity():
    img = Rng(3).uniform((32, 32)).astype(np.float32)
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)


def test_ssim_independent_noise_near_zero():
    for seed in range(10):
        rng = Rng(100 + seed)
        a = rng.uniform((48, 48))
        b = rng.uniform((48, 48))
        assert abs(ssim(a, b)) < 0.1


def test_ssim_ordering_contrast_vs_shuffle():
    img, _ = gen_scene(SceneSpec(seed=7, texture="noise", width=48, height=48))
    a = img.data[:, :, 0]
    contrast = np.clip(0.5 + (a - 0.5) * 0.6, 0, 1)
    rng = Rng(8)
    perm = np.argsort(rng.uniform((a.size,)))
    shuffled = a.ravel()[perm].reshape(a.shape)
    s_contrast = ssim(a, contrast)
    s_shuffled = ssim(a, shuffled)
    assert s_contrast < 1.0
    assert s_contrast > s_shuffled


def test_ssim_symmetric():
    rng = Rng(9)
    a = rng.uniform((32, 32))
    b = np.clip(a + 0.1 * rng.normal((32, 32)), 0, 1)
    assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-10)


# ---------------------------------------------------------------------------
# hf_energy
# ---------------------------------------------------------------------------

def test_hf_energy_constant_zero():
    assert hf_energy(np.full((16, 16), 0.3)) == 0.0


def test_hf_energy_white_noise_high():
    x = Rng(10).uniform((64, 64))
    assert hf_energy(x) > 0.5


def test_hf_energy_blur_strictly_lower():
    x = Rng(11).uniform((64, 64))
    blurred = ndimage.gaussian_filter(x, 1.5)
    assert hf_energy(blurred) < hf_energy(x)


def test_hf_energy_range():
    for seed in range(5):
        x = Rng(seed).uniform((32, 32))
        assert 0.0 <= hf_energy(x) <= 1.0


# ---------------------------------------------------------------------------
# patch_stat_distance
# ---------------------------------------------------------------------------

def _image_set(seed0, count=32, blur=None):
    out = []
    for i in range(count):
        img, _ = gen_scene(SceneSpec(seed=seed0 + i, texture="noise", width=32, height=32))
        a = img.data[:, :, 0]
        if blur:
            a = ndimage.gaussian_filter(a, blur)
        out.append(a)
    return out


def test_patch_distance_self_zero():
    s = _image_set(1000)
    assert patch_stat_distance(s, s) == pytest.approx(0.0, abs=1e-6)


def test_patch_distance_halves_below_blur():
    clean = _image_set(2000, count=64)
    half_a, half_b = clean[:32], clean[32:]
    d_halves = patch_stat_distance(half_a, half_b)
    blurred = _image_set(2000, count=32, blur=1.5)
    d_blur = patch_stat_distance(blurred, half_a)
    assert d_halves < d_blur


def test_patch_distance_monotone_in_blur():
    ref = _image_set(3000, count=32)
    dists = []
    for radius in (1.0, 2.0, 4.0):
        blurred = _image_set(3000, count=32, blur=radius)
        dists.append(patch_stat_distance(blurred, ref))
    assert dists[0] < dists[1] < dists[2]


def test_patch_distance_requires_30_images():
    s = _image_set(4000, count=10)
    with pytest.raises(ValueError):
        patch_stat_distance(s, s)


def test_patch_distance_nonnegative_and_deterministic():
    a = _image_set(5000, count=30)
    b = _image_set(6000, count=30, blur=0.8)
    d1 = patch_stat_distance(a, b)
    d2 = patch_stat_distance(a, b)
    assert d1 >= 0
    assert d1 == d2
