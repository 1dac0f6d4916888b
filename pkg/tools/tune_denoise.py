"""Parameter sweep for the frozen pipeline constants (development only).

Stage 1: base penalty coefficient c for the plain composite methods.
Stage 2: (omega_g, omega_s) for the fixed-weight solve at the chosen c.
Stage 3: learned-weight runs on the finalists, tracking specific-block use.
"""
import sys
import time

import numpy as np

from compdict.assets import test_images, training_images
from compdict.dictionaries import CompositeDictionary, ExamplePool, ksvd_learn
from compdict.patches import add_gaussian_noise, extract_patches, psnr, reconstruct_overlap
from compdict.pipelines import external_patch_pool
from compdict.sparse_coding import PenaltyProfile
from compdict.solver import SolverConfig, batch_code, batch_weights, coordinate_descent
from compdict.weights import FixedRBFParams

SIDE = 64


def run_plain(feats, means, dec, comp, lam):
    pen = PenaltyProfile.for_blocks(lam, lam, comp.n_global, comp.n_specific)
    codes = batch_code(feats, comp, None, pen)
    recon = codes @ comp.matrix.T + means[:, None]
    return reconstruct_overlap(dec, recon) * 255, codes


def run_fw(feats, means, dec, comp, lam, lam_i, og, os_):
    pen = PenaltyProfile.for_blocks(lam, lam_i, comp.n_global, comp.n_specific)
    params = FixedRBFParams(og, os_)
    w = batch_weights(feats, comp, params)
    codes = batch_code(feats, comp, params, pen)
    recon = (w * codes) @ comp.matrix.T + means[:, None]
    return reconstruct_overlap(dec, recon) * 255, codes


def run_lw(feats, means, dec, comp, cfg):
    state = coordinate_descent(feats, comp, cfg)
    w = batch_weights(feats, comp, state.params)
    recon = (w * state.codes) @ comp.matrix.T + means[:, None]
    return reconstruct_overlap(dec, recon) * 255, state.codes


def main():
    clean_full = test_images()["camera"]
    clean = clean_full[:SIDE, :SIDE]
    pool = external_patch_pool(training_images(), max_examples=20000, rng_seed=0)
    gdict = ksvd_learn(pool, 128, 3, 12, 0)

    for sigma in (10.0, 20.0):
        noisy = add_gaussian_noise(clean, sigma, rng_seed=1)
        y01 = noisy / 255.0
        dec = extract_patches(y01, 5)
        means = dec.patches.mean(axis=1)
        feats = dec.patches - means[:, None]
        sdict = ksvd_learn(ExamplePool(feats, "internal"), 32, 3, 12, 0)
        comp = CompositeDictionary(gdict, sdict)
        s01 = sigma / 255.0
        print(f"== sigma {sigma}  noisy {psnr(clean, noisy):.2f}", flush=True)

        print("-- stage 1: plain composite over c")
        for c in (0.8, 1.2, 1.6, 2.2, 3.0):
            out, codes = run_plain(feats, means, dec, comp, max(c * s01, 2e-3))
            ns = np.count_nonzero(codes[:, 128:]) / codes.shape[0]
            print(f"   c={c}: {psnr(clean, out):.2f} dB  spec_use={ns:.2f}", flush=True)

        print("-- stage 2: FW over omegas (c fixed per stage-1 best guess 1.6)")
        lam = max(1.6 * s01, 2e-3)
        for og in (0.2, 0.4, 0.7):
            for mult in (1.5, 2.0, 4.0):
                out, codes = run_fw(feats, means, dec, comp, lam, 10 * lam, og, og * mult)
                ns = np.count_nonzero(codes[:, 128:]) / codes.shape[0]
                print(f"   og={og} os={og*mult}: {psnr(clean, out):.2f} dB  spec_use={ns:.2f}",
                      flush=True)

        print("-- stage 3: LW on finalists")
        for og, mult, c in ((0.2, 2.0, 1.2), (0.4, 2.0, 1.6), (0.4, 1.5, 1.6), (0.7, 2.0, 1.6)):
            lam = max(c * s01, 2e-3)
            cfg = SolverConfig(lambda_e=lam, omega_g=og, omega_s=og * mult, rng_seed=0)
            t0 = time.perf_counter()
            out, codes = run_lw(feats, means, dec, comp, cfg)
            ns = np.count_nonzero(codes[:, 128:]) / codes.shape[0]
            print(f"   og={og} os={og*mult} c={c}: {psnr(clean, out):.2f} dB  "
                  f"spec_use={ns:.2f}  ({time.perf_counter()-t0:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
