"""8-bit PGM/PNG reading and writing.

Files are read into float64 arrays in [0, 255]; color inputs are collapsed
to the Rec. 601 luma channel at ingestion. Writing clips to [0, 255] and
rounds to 8 bits; all internal processing stays in float64.
"""
from __future__ import annotations

import os

import numpy as np
from PIL import Image as _PILImage

__all__ = ["load_image", "save_image"]


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a PGM or PNG file as a float64 grayscale image in [0, 255]."""
    with _PILImage.open(path) as im:
        if im.mode not in ("L", "I;16", "I"):
            # Pillow's "L" conversion is the Rec. 601 luma transform.
            im = im.convert("L")
        arr = np.asarray(im, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel image, got {arr.shape}")
    if arr.max() > 255.0:
        arr = arr * (255.0 / arr.max())  # 16-bit PGM, rescale
    return arr


def save_image(image: np.ndarray, path: str | os.PathLike) -> None:
    """Write an image as 8-bit PGM or PNG, chosen by file extension."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    eight_bit = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext not in (".pgm", ".png"):
        raise ValueError(f"unsupported image format {ext!r}; use .pgm or .png")
    _PILImage.fromarray(eight_bit, mode="L").save(path)
