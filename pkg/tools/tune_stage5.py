"""Stage 5: sharp-selection regime, low base penalty x large omega."""
import numpy as np

from compdict.assets import test_images, training_images
from compdict.dictionaries import CompositeDictionary, ExamplePool, ksvd_learn
from compdict.patches import add_gaussian_noise, extract_patches, psnr, reconstruct_overlap
from compdict.pipelines import external_patch_pool
from compdict.sparse_coding import PenaltyProfile
from compdict.solver import SolverConfig, batch_code, batch_weights, coordinate_descent
from compdict.weights import FixedRBFParams

SIDE = 64


def main():
    imgs = test_images()
    pool = external_patch_pool(training_images(), max_examples=20000, rng_seed=0)
    gdict = ksvd_learn(pool, 128, 3, 12, 0)
    for img_name in ("camera", "brick"):
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
            for c in (0.8, 1.2, 1.8):
                for og in (0.8, 1.2, 2.0):
                    lam = max(c * s01, 2e-3)
                    pen = PenaltyProfile.for_blocks(lam, lam, 128, 32)
                    params = FixedRBFParams(og, 2 * og)
                    wfw = batch_weights(feats, comp, params)
                    codes = batch_code(feats, comp, params, pen)
                    out = reconstruct_overlap(
                        dec, (wfw * codes) @ comp.matrix.T + means[:, None]) * 255
                    fw = psnr(clean, out)
                    cfg = SolverConfig(lambda_e=lam, lambda_i=lam, omega_g=og,
                                       omega_s=2 * og, rng_seed=0)
                    state = coordinate_descent(feats, comp, cfg)
                    w = batch_weights(feats, comp, state.params)
                    out = reconstruct_overlap(
                        dec, (w * state.codes) @ comp.matrix.T + means[:, None]) * 255
                    lw = psnr(clean, out)
                    su = np.count_nonzero(state.codes[:, 128:]) / len(feats)
                    print(f"   c={c} og={og}: FW={fw:.2f} LW={lw:.2f} spec={su:.2f}",
                          flush=True)


if __name__ == "__main__":
    main()
