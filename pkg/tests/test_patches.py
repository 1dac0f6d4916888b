"""Patch grid, noise synthesis, PSNR, and image I/O."""
import numpy as np
import pytest

from compdict.imgio import load_image, save_image
from compdict.patches import (
    add_gaussian_noise,
    extract_patches,
    psnr,
    reconstruct_overlap,
)


def test_single_position_case():
    img = np.arange(25.0).reshape(5, 5)
    dec = extract_patches(img, side=5, stride=1)
    assert len(dec) == 1
    assert tuple(dec.anchors[0]) == (0, 0)
    assert np.array_equal(dec.patches[0], img.ravel())


def test_counts_on_6x6():
    img = np.zeros((6, 6))
    dec = extract_patches(img, side=5, stride=1)
    assert len(dec) == 4
    assert [tuple(a) for a in dec.anchors] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_count_formula_by_independent_loop():
    rng = np.random.default_rng(0)
    for h, w, side, stride in [(256, 256, 5, 1), (16, 11, 3, 2), (9, 9, 4, 3), (7, 12, 5, 2)]:
        img = rng.random((h, w))
        dec = extract_patches(img, side, stride)
        count = 0
        for r in range(0, h - side + 1, stride):
            for c in range(0, w - side + 1, stride):
                count += 1
        assert len(dec) == count
    assert len(extract_patches(np.zeros((256, 256)), 5, 1)) == 63504


def test_patch_vector_order_is_row_major():
    img = np.arange(36.0).reshape(6, 6)
    dec = extract_patches(img, side=3, stride=1)
    k = [tuple(a) for a in dec.anchors].index((1, 2))
    assert np.array_equal(dec.patches[k], img[1:4, 2:5].ravel())


def test_too_small_image_rejected():
    with pytest.raises(ValueError):
        extract_patches(np.zeros((4, 9)), side=5)


def test_roundtrip_identity_on_8bit_valued_image():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, size=(32, 32)).astype(np.float64)
    dec = extract_patches(img, side=5, stride=1)
    back = reconstruct_overlap(dec)
    assert np.array_equal(back, img)


def test_roundtrip_close_on_float_image():
    rng = np.random.default_rng(2)
    img = rng.random((20, 17)) * 255.0
    dec = extract_patches(img, side=5, stride=1)
    back = reconstruct_overlap(dec)
    assert np.allclose(back, img, rtol=0.0, atol=1e-12)


def test_mean_of_two_disagreeing_patches():
    img = np.zeros((5, 6))
    dec = extract_patches(img, side=5, stride=1)
    patches = dec.patches.copy()
    # the shared pixel (0, 1) is patch-0 column 1 and patch-1 column 0
    patches[0, 1] = 10.0
    patches[1, 0] = 20.0
    out = reconstruct_overlap(dec, patches)
    assert out[0, 1] == 15.0


def test_uncovered_pixels_rejected():
    img = np.zeros((7, 7))
    dec = extract_patches(img, side=3, stride=3)   # covers only 6x6 of 7x7
    with pytest.raises(ValueError):
        reconstruct_overlap(dec)


def test_full_coverage_stride_above_one():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(9, 9)).astype(np.float64)
    dec = extract_patches(img, side=3, stride=3)
    assert np.array_equal(reconstruct_overlap(dec), img)


def test_patch_count_mismatch_rejected():
    dec = extract_patches(np.zeros((6, 6)), side=5)
    with pytest.raises(ValueError):
        reconstruct_overlap(dec, np.zeros((3, 25)))


def test_noise_zero_sigma_is_identity():
    rng = np.random.default_rng(4)
    img = rng.random((8, 8)) * 255
    assert np.array_equal(add_gaussian_noise(img, 0.0, 99), img)


def test_noise_std_matches_sigma():
    img = np.full((1000, 1000), 128.0)
    noisy = add_gaussian_noise(img, 10.0, rng_seed=7)
    std = np.std(noisy - img)
    assert abs(std - 10.0) / 10.0 < 0.01


def test_noise_deterministic_and_unclipped():
    img = np.zeros((64, 64))
    a = add_gaussian_noise(img, 25.0, rng_seed=5)
    b = add_gaussian_noise(img, 25.0, rng_seed=5)
    assert np.array_equal(a, b)
    assert a.min() < 0.0          # negative excursions retained
    with pytest.raises(ValueError):
        add_gaussian_noise(img, -1.0, 0)


def test_psnr_values():
    img = np.full((10, 10), 100.0)
    assert psnr(img, img) == float("inf")
    assert abs(psnr(img, img + 1.0) - 48.1308) < 1e-3
    with pytest.raises(ValueError):
        psnr(img, np.zeros((5, 5)))


def test_psnr_of_known_noise_level():
    img = np.full((1200, 1200), 128.0)
    noisy = add_gaussian_noise(img, 10.0, rng_seed=11)
    # MSE -> sigma^2 asymptotically: 10 log10(255^2 / 100) = 28.13 dB
    assert abs(psnr(img, noisy) - 28.13) < 0.1


def test_psnr_symmetry_and_monotonicity():
    rng = np.random.default_rng(12)
    ref = rng.random((30, 30)) * 255
    t1 = ref + rng.normal(0, 2, ref.shape)
    t2 = ref + rng.normal(0, 8, ref.shape)
    assert psnr(ref, t1) == psnr(t1, ref)
    assert psnr(ref, t1) > psnr(ref, t2)


def test_image_roundtrip_png_pgm(tmp_path):
    rng = np.random.default_rng(13)
    img = rng.integers(0, 256, size=(21, 17)).astype(np.float64)
    for ext in ("png", "pgm"):
        path = tmp_path / f"img.{ext}"
        save_image(img, path)
        back = load_image(path)
        assert np.array_equal(back, img)


def test_color_png_collapses_to_luma(tmp_path):
    from PIL import Image as PILImage

    rgb = np.zeros((4, 4, 3), dtype=np.uint8)
    rgb[..., 0] = 200   # pure red
    path = tmp_path / "c.png"
    PILImage.fromarray(rgb, "RGB").save(path)
    got = load_image(path)
    assert got.shape == (4, 4)
    # Rec. 601: 0.299 * 200 = 59.8 -> Pillow rounds via its fixed-point table
    assert abs(got[0, 0] - 59.8) < 1.0


def test_save_clips_to_8bit(tmp_path):
    img = np.array([[-20.0, 300.0], [128.4, 127.5]])
    path = tmp_path / "clip.png"
    save_image(img, path)
    back = load_image(path)
    assert back[0, 0] == 0.0 and back[0, 1] == 255.0
