"""Image <-> patch-grid conversion, noise synthesis, and quality metrics.

Images are 2-D float64 arrays in the canonical intensity range [0, 255].
Patches are columnized row-major (C order) into vectors of length side**2
and stacked as rows of an (n_patches, p) matrix, with anchors enumerated
in row-major scan order over the valid top-left positions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PatchDecomposition",
    "extract_patches",
    "reconstruct_overlap",
    "add_gaussian_noise",
    "psnr",
]


@dataclass(frozen=True)
class PatchDecomposition:
    """A strided grid of square patches cut from one image.

    Attributes
    ----------
    patches : (n, side*side) float64 array, one row per patch
    anchors : (n, 2) int array of (row, col) top-left corners
    side : patch side length in pixels
    stride : step between anchors
    image_shape : (height, width) of the source image
    """

    patches: np.ndarray
    anchors: np.ndarray
    side: int
    stride: int
    image_shape: tuple[int, int]

    def __len__(self) -> int:
        return self.patches.shape[0]


def extract_patches(image: np.ndarray, side: int = 5, stride: int = 1) -> PatchDecomposition:
    """Cut every valid side x side patch from `image` on a strided grid.

    Anchors run over rows 0, stride, 2*stride, ... <= H-side and likewise
    over columns, so at stride 1 the grid covers every valid position and
    the patch count is (H-side+1)*(W-side+1).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {image.shape}")
    if side < 1 or stride < 1:
        raise ValueError("side and stride must be >= 1")
    h, w = image.shape
    if h < side or w < side:
        raise ValueError(f"image {h}x{w} is smaller than the patch side {side}")

    rows = np.arange(0, h - side + 1, stride)
    cols = np.arange(0, w - side + 1, stride)
    windows = np.lib.stride_tricks.sliding_window_view(image, (side, side))
    grid = windows[rows[:, None], cols[None, :]]           # (nr, nc, side, side)
    patches = grid.reshape(len(rows) * len(cols), side * side).copy()
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    anchors = np.stack([rr.ravel(), cc.ravel()], axis=1)
    return PatchDecomposition(patches, anchors, side, stride, (h, w))


def reconstruct_overlap(dec: PatchDecomposition, patches: np.ndarray | None = None) -> np.ndarray:
    """Reassemble an image from (possibly modified) patches of a decomposition.

    Each output pixel is the arithmetic mean of every patch value covering
    it. Every pixel must be covered by at least one patch; strides that
    leave gaps are rejected rather than guessed at.
    """
    if patches is None:
        patches = dec.patches
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != dec.patches.shape:
        raise ValueError(
            f"patch array shape {patches.shape} does not match decomposition "
            f"{dec.patches.shape}"
        )
    h, w = dec.image_shape
    side = dec.side
    acc = np.zeros((h, w))
    cover = np.zeros((h, w))
    tiles = patches.reshape(-1, side, side)
    for (r, c), tile in zip(dec.anchors, tiles):
        acc[r : r + side, c : c + side] += tile
        cover[r : r + side, c : c + side] += 1.0
    if np.any(cover == 0):
        raise ValueError("patch grid does not cover the image; reduce the stride")
    return acc / cover


def add_gaussian_noise(image: np.ndarray, sigma: float, rng_seed: int) -> np.ndarray:
    """Add pixel-wise i.i.d. N(0, sigma^2) noise, deterministically per seed.

    The result is not clipped; clipping happens only at 8-bit export.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    image = np.asarray(image, dtype=np.float64)
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(rng_seed)
    return image + rng.normal(0.0, sigma, size=image.shape)


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB with a fixed peak of 255.

    Identical images give math.inf (the documented zero-MSE sentinel).
    """
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    mse = np.mean((reference - test) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(255.0**2 / mse))
