"""Stage 4: per-method penalty scales, internal-ratio choices, r-sweep preview."""
import time

import numpy as np

from compdict.assets import test_images, training_images
from compdict.dictionaries import BaseDictionary, CompositeDictionary, ExamplePool, ksvd_learn
from compdict.patches import add_gaussian_noise, extract_patches, psnr, reconstruct_overlap
from compdict.pipelines import external_patch_pool
from compdict.sparse_coding import PenaltyProfile
from compdict.solver import SolverConfig, batch_code, batch_weights, coordinate_descent
from compdict.weights import FixedRBFParams

SIDE = 64


def prep(clean, sigma, seed=1):
    noisy = add_gaussian_noise(clean, sigma, rng_seed=seed)
    dec = extract_patches(noisy / 255.0, 5)
    means = dec.patches.mean(axis=1)
    feats = dec.patches - means[:, None]
    return noisy, dec, means, feats


def rebuild(dec, means, recon):
    return reconstruct_overlap(dec, recon + means[:, None]) * 255


def main():
    imgs = test_images()
    pool = external_patch_pool(training_images(), max_examples=20000, rng_seed=0)
    gcache = {}

    def gdict(m):
        if m not in gcache:
            gcache[m] = ksvd_learn(pool, m, 3, 12, 0) if m else None
        return gcache[m]

    for img_name in ("camera", "brick"):
        clean = imgs[img_name][:SIDE, :SIDE]
        for sigma in (10.0, 20.0):
            noisy, dec, means, feats = prep(clean, sigma)
            s01 = sigma / 255.0
            sdict32 = ksvd_learn(ExamplePool(feats, "internal"), 32, 3, 12, 0)
            comp = CompositeDictionary(gdict(128), sdict32)
            print(f"== {img_name} sigma={sigma} noisy={psnr(clean, noisy):.2f}", flush=True)

            print("-- plain c sweep (ksvd_c)")
            for c in (2.2, 3.0, 4.0, 5.0, 6.5):
                lam = max(c * s01, 2e-3)
                pen = PenaltyProfile.for_blocks(lam, lam, 128, 32)
                codes = batch_code(feats, comp, None, pen)
                out = rebuild(dec, means, codes @ comp.matrix.T)
                print(f"   c={c}: {psnr(clean, out):.2f}", flush=True)

            print("-- LW: c x omega x ratio")
            for c in (2.2, 3.0, 4.0):
                for og in (0.4, 0.7):
                    for ratio in (1.0, 2.0):
                        lam = max(c * s01, 2e-3)
                        cfg = SolverConfig(lambda_e=lam, lambda_i=ratio * lam,
                                           omega_g=og, omega_s=2 * og, rng_seed=0)
                        state = coordinate_descent(feats, comp, cfg)
                        w = batch_weights(feats, comp, state.params)
                        out = rebuild(dec, means, (w * state.codes) @ comp.matrix.T)
                        su = np.count_nonzero(state.codes[:, 128:]) / len(feats)
                        print(f"   c={c} og={og} ratio={ratio}: {psnr(clean, out):.2f} "
                              f"spec_use={su:.2f}", flush=True)

            if sigma == 10.0:
                print("-- r preview at sigma 10 (LW, c=3, og=0.4, ratio=1)")
                lam = max(3.0 * s01, 2e-3)
                for m, n in ((0, 160), (128, 32), (150, 10)):
                    sd = ksvd_learn(ExamplePool(feats, "internal"), n, 3, 12, 0)
                    gp = gdict(m) or BaseDictionary(np.zeros((25, 0)), "external")
                    cc = CompositeDictionary(gp, sd)
                    cfg = SolverConfig(lambda_e=lam, lambda_i=lam, omega_g=0.4,
                                       omega_s=0.8, rng_seed=0)
                    t0 = time.perf_counter()
                    state = coordinate_descent(feats, cc, cfg)
                    w = batch_weights(feats, cc, state.params)
                    out = rebuild(dec, means, (w * state.codes) @ cc.matrix.T)
                    su = np.count_nonzero(state.codes[:, m:]) / len(feats)
                    print(f"   (M,N)=({m},{n}): {psnr(clean, out):.2f} spec_use={su:.2f} "
                          f"({time.perf_counter()-t0:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
