"""Preview criterion 6 and 7 orderings on 64x64 crops at the frozen config."""
import numpy as np

from compdict.assets import test_images, training_images
from compdict.dictionaries import ksvd_learn
from compdict.patches import add_gaussian_noise, psnr
from compdict.pipelines import (
    DenoiseJob,
    denoise,
    dict_sizes_from_ratio,
    external_patch_pool,
)

SIDE = 64


def main():
    imgs = {k: v[:SIDE, :SIDE] for k, v in test_images().items()}
    pool = external_patch_pool(training_images(), rng_seed=0)
    gcache = {}

    def gdict(m):
        if m and m not in gcache:
            gcache[m] = ksvd_learn(pool, m, 3, 15, 0)
        return gcache.get(m)

    print("== criterion 6 preview")
    for sigma in (10.0, 20.0):
        rows = {}
        for method in ("ksvd_g", "ksvd_s", "ksvd_c", "sc_lw"):
            vals = []
            for idx, (name, clean) in enumerate(imgs.items()):
                noisy = add_gaussian_noise(clean, sigma, 10007 * 0 + idx * 101 + int(sigma))
                job = DenoiseJob(noisy, sigma, method, ksvd_iterations=15, rng_seed=0)
                out, rep = denoise(job, gdict(128), reference=clean)
                vals.append(rep["psnr_db"])
            rows[method] = (float(np.mean(vals)), [round(v, 2) for v in vals])
        for m, (avg, vals) in rows.items():
            print(f"  sigma={sigma} {m}: avg={avg:.3f} {vals}", flush=True)
        print(f"  -> LW-C margin {rows['sc_lw'][0]-rows['ksvd_c'][0]:+.3f}; "
              f"C-maxGS margin {rows['ksvd_c'][0]-max(rows['ksvd_g'][0], rows['ksvd_s'][0]):+.3f}")

    print("== criterion 7 preview (sigma=10)")
    sigma = 10.0
    avgs = {}
    for r in (0, 4, 15):
        m, n = dict_sizes_from_ratio(r)
        vals = []
        for idx, (name, clean) in enumerate(imgs.items()):
            noisy = add_gaussian_noise(clean, sigma, idx * 101 + int(sigma))
            job = DenoiseJob(noisy, sigma, "sc_lw", m_atoms=m, n_atoms=n,
                             ksvd_iterations=15, rng_seed=0)
            out, rep = denoise(job, gdict(m), reference=clean)
            vals.append(rep["psnr_db"])
        avgs[r] = float(np.mean(vals))
        print(f"  r={r} (M={m},N={n}): avg={avgs[r]:.3f} {[round(v,2) for v in vals]}",
              flush=True)
    print(f"  -> r4-r0 {avgs[4]-avgs[0]:+.3f} (need >0.2); r4-r15 {avgs[4]-avgs[15]:+.3f}")


if __name__ == "__main__":
    main()
