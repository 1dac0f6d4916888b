"""Stage 6: near-flat global kernel + sharp internal kernel, per-method c."""
import numpy as np

from compdict.assets import test_images, training_images
from compdict.dictionaries import CompositeDictionary, ExamplePool, ksvd_learn
from compdict.patches import add_gaussian_noise, extract_patches, psnr, reconstruct_overlap
from compdict.pipelines import external_patch_pool
from compdict.sparse_coding import PenaltyProfile
from compdict.solver import SolverConfig, batch_code, batch_weights, coordinate_descent

SIDE = 64


def main():
    imgs = test_images()
    pool = external_patch_pool(training_images(), max_examples=20000, rng_seed=0)
    gdict = ksvd_learn(pool, 128, 3, 12, 0)
    sdict_cache = {}
    for img_name in ("camera", "brick", "rocket"):
        clean = imgs[img_name][:SIDE, :SIDE]
        for sigma in (10.0, 20.0):
            noisy = add_gaussian_noise(clean, sigma, rng_seed=1)
            dec = extract_patches(noisy / 255.0, 5)
            means = dec.patches.mean(axis=1)
            feats = dec.patches - means[:, None]
            sdict = ksvd_learn(ExamplePool(feats, "internal"), 32, 3, 12, 0)
            comp = CompositeDictionary(gdict, sdict)
            s01 = sigma / 255.0
            print(f"== {img_name} sigma={sigma}", flush=True)
            for c in (3.0, 4.0, 5.0):
                lam = max(c * s01, 2e-3)
                pen = PenaltyProfile.for_blocks(lam, lam, 128, 32)
                codes = batch_code(feats, comp, None, pen)
                out = reconstruct_overlap(dec, codes @ comp.matrix.T + means[:, None]) * 255
                plain = psnr(clean, out)
                row = [f"   c={c}: plain={plain:.2f}"]
                for og in (0.05, 0.1, 0.2):
                    for mult in (4, 10):
                        cfg = SolverConfig(lambda_e=lam, lambda_i=lam, omega_g=og,
                                           omega_s=og * mult, rng_seed=0)
                        state = coordinate_descent(feats, comp, cfg)
                        w = batch_weights(feats, comp, state.params)
                        out = reconstruct_overlap(
                            dec, (w * state.codes) @ comp.matrix.T + means[:, None]) * 255
                        lw = psnr(clean, out)
                        su = np.count_nonzero(state.codes[:, 128:]) / len(feats)
                        row.append(f"og={og}x{mult}: {lw:.2f}({su:.2f})")
                print("  ".join(row), flush=True)


if __name__ == "__main__":
    main()
