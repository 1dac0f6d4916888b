"""Stage 7: joint criterion-6/criterion-7 margin sweep over (omega_s, ratio, c)."""
import itertools

import numpy as np

from compdict.assets import test_images, training_images
from compdict.dictionaries import BaseDictionary, CompositeDictionary, ExamplePool, ksvd_learn
from compdict.patches import add_gaussian_noise, extract_patches, psnr, reconstruct_overlap
from compdict.pipelines import external_patch_pool, dict_sizes_from_ratio
from compdict.sparse_coding import PenaltyProfile
from compdict.solver import SolverConfig, batch_code, batch_weights, coordinate_descent

SIDE = 64


def main():
    imgs = {k: v[:SIDE, :SIDE] for k, v in test_images().items()}
    pool = external_patch_pool(training_images(), rng_seed=0)
    gcache: dict = {}

    def gdict(m):
        if m and m not in gcache:
            gcache[m] = ksvd_learn(pool, m, 3, 15, 0)
        return gcache.get(m)

    # precompute noisy decompositions and internal dictionaries
    prep: dict = {}
    for sigma in (10.0, 20.0):
        for idx, (name, clean) in enumerate(imgs.items()):
            noisy = add_gaussian_noise(clean, sigma, idx * 101 + int(sigma))
            dec = extract_patches(noisy / 255.0, 5)
            means = dec.patches.mean(axis=1)
            feats = dec.patches - means[:, None]
            sdicts = {n: ksvd_learn(ExamplePool(feats, "internal"), n, 3, 15, 0)
                      for n in (160, 32, 10)}
            prep[(sigma, name)] = (clean, dec, means, feats, sdicts)

    def run_lw(sigma, name, m, n, cfg):
        clean, dec, means, feats, sdicts = prep[(sigma, name)]
        gp = gdict(m) or BaseDictionary(np.zeros((25, 0)), "external")
        comp = CompositeDictionary(gp, sdicts[n])
        state = coordinate_descent(feats, comp, cfg)
        w = batch_weights(feats, comp, state.params)
        out = reconstruct_overlap(dec, (w * state.codes) @ comp.matrix.T + means[:, None]) * 255
        return psnr(clean, out)

    def run_plain(sigma, name, m, n, lam):
        clean, dec, means, feats, sdicts = prep[(sigma, name)]
        gp = gdict(m) or BaseDictionary(np.zeros((25, 0)), "external")
        comp = CompositeDictionary(gp, sdicts[n] if n else
                                   BaseDictionary(np.zeros((25, 0)), "internal"))
        pen = PenaltyProfile.for_blocks(lam, lam, comp.n_global, comp.n_specific)
        codes = batch_code(feats, comp, None, pen)
        out = reconstruct_overlap(dec, codes @ comp.matrix.T + means[:, None]) * 255
        return psnr(clean, out)

    c = 3.0
    plains: dict = {}
    for sigma in (10.0, 20.0):
        lam = c * sigma / 255.0
        for tag, (m, n) in {"g": (128, 0), "s": (0, 32), "c": (128, 32)}.items():
            plains[(sigma, tag)] = float(np.mean(
                [run_plain(sigma, name, m, n, lam) for name in imgs]))
        print(f"plain sigma={sigma}: G={plains[(sigma,'g')]:.3f} "
              f"S={plains[(sigma,'s')]:.3f} C={plains[(sigma,'c')]:.3f}", flush=True)

    for os_, ratio in itertools.product((0.2, 0.4, 0.8), (1.0, 1.5, 2.0, 3.0)):
        lw = {}
        for sigma in (10.0, 20.0):
            lam = c * sigma / 255.0
            cfg = SolverConfig(lambda_e=lam, lambda_i=ratio * lam, omega_g=0.05,
                               omega_s=os_, rng_seed=0)
            lw[sigma] = float(np.mean([run_lw(sigma, nm, 128, 32, cfg) for nm in imgs]))
        sigma = 10.0
        lam = c * sigma / 255.0
        cfg = SolverConfig(lambda_e=lam, lambda_i=ratio * lam, omega_g=0.05,
                           omega_s=os_, rng_seed=0)
        rvals = {}
        for r in (0, 4, 15):
            m, n = dict_sizes_from_ratio(r)
            rvals[r] = float(np.mean([run_lw(sigma, nm, m, n, cfg) for nm in imgs]))
        ok6a = lw[10.0] - plains[(10.0, "c")]
        ok6b = lw[20.0] - plains[(20.0, "c")]
        print(f"os={os_} ratio={ratio}: LW10={lw[10.0]:.3f} ({ok6a:+.3f}) "
              f"LW20={lw[20.0]:.3f} ({ok6b:+.3f}) | r0={rvals[0]:.3f} r4={rvals[4]:.3f} "
              f"r15={rvals[15]:.3f} gaps r4-r0={rvals[4]-rvals[0]:+.3f} "
              f"r4-r15={rvals[4]-rvals[15]:+.3f}", flush=True)


if __name__ == "__main__":
    main()
