"""Access to the bundled desk-scale images.

Three 128x128 grayscale test tiles and five 256x256 training tiles ship
with the package (CC0 / public-domain crops; see tools/make_assets.py in
the repository for their regeneration). They stand in for the classic
benchmark images, which are not redistributable.
"""
from __future__ import annotations

from importlib import resources

import numpy as np

from .imgio import load_image

__all__ = ["test_images", "training_images", "asset_names"]

_TEST = ("camera", "coins", "text")
_TRAIN = ("grass", "gravel", "astronaut", "coffee", "chelsea")


def _load(name: str) -> np.ndarray:
    ref = resources.files("compdict.data").joinpath(f"{name}.png")
    with resources.as_file(ref) as path:
        return load_image(path)


def asset_names() -> dict:
    return {"test": list(_TEST), "train": list(_TRAIN)}


def test_images() -> dict[str, np.ndarray]:
    """The bundled 128x128 evaluation tiles, keyed by short name."""
    return {name: _load(f"test_{name}") for name in _TEST}


def training_images() -> list[np.ndarray]:
    """The bundled training corpus standing in for an external image set."""
    return [_load(f"train_{name}") for name in _TRAIN]
