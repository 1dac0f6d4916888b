"""Regenerate the bundled desk-scale images under src/compdict/data/.

Sources are scikit-image's locally bundled sample images (CC0 / public
domain), cropped to small grayscale tiles: three 128x128 test images and
five 256x256 training tiles. Run from the repository root:

    python3 tools/make_assets.py
"""
import pathlib

import numpy as np
import skimage.data

from compdict.imgio import save_image

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "compdict" / "data"


def luma(rgb):
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    camera = skimage.data.camera().astype(float)
    coins = skimage.data.coins().astype(float)
    text = skimage.data.text().astype(float)

    # test tiles: mixed structure, repeated objects, self-similar glyphs
    save_image(camera[64:192, 192:320], OUT / "test_camera.png")
    save_image(coins[40:168, 120:248], OUT / "test_coins.png")
    save_image(text[10:138, 100:228], OUT / "test_text.png")

    grass = skimage.data.grass().astype(float)
    gravel = skimage.data.gravel().astype(float)
    astro = luma(skimage.data.astronaut().astype(float))
    coffee = luma(skimage.data.coffee().astype(float))
    chelsea = luma(skimage.data.chelsea().astype(float))

    save_image(grass[64:320, 64:320], OUT / "train_grass.png")
    save_image(gravel[64:320, 64:320], OUT / "train_gravel.png")
    save_image(astro[128:384, 96:352], OUT / "train_astronaut.png")
    save_image(coffee[80:336, 180:436], OUT / "train_coffee.png")
    save_image(chelsea[20:276, 100:356], OUT / "train_chelsea.png")

    for f in sorted(OUT.glob("*.png")):
        print("wrote", f)


if __name__ == "__main__":
    main()
