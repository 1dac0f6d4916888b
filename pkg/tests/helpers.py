"""Small deterministic images for fast pipeline tests."""
import numpy as np


def tiny_image(size: int, kind: str = "edges", seed: int = 0) -> np.ndarray:
    """A structured grayscale tile in [0, 255] with repeating content."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    if kind == "texture":
        img = 128 + 55 * np.sin(2 * np.pi * xx / 7.0) * np.cos(2 * np.pi * yy / 9.0)
        img += 25 * np.sin(2 * np.pi * (xx + yy) / 13.0)
    else:
        img = 90 + 80 * ((xx // 8 + yy // 8) % 2)
        img += 10 * np.sin(2 * np.pi * xx / 5.0)
    img += rng.normal(0, 1.0, img.shape)   # mild fixed dither so patches differ
    return np.clip(img, 0, 255)


def tiny_corpus(n: int = 2, size: int = 40) -> list[np.ndarray]:
    """Training tiles with related but not identical statistics."""
    out = []
    for i in range(n):
        out.append(tiny_image(size, kind="texture" if i % 2 == 0 else "edges", seed=10 + i))
    return out
