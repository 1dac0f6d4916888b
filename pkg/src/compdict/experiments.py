"""Reproducible experiment grids over the bundled desk-scale images.

Four grids mirror the evaluation protocol this library implements:

  table1  KNN-base method comparison (adaptive weights vs conventional SC
          vs K-SVD bases) at sigma = 10
  table2  denoising methods x noise levels, averaged over the test images
  table3  atom-ratio sweep of the learned-weight solver at a fixed total
          dictionary size of 160
  table4  x3 super-resolution against the interpolation baseline

Each grid returns an ExperimentTable whose rows carry the measured PSNR
plus, where the layout matches, the corresponding published reference
value (context only: the training corpus and test tiles differ, so
absolute numbers are not comparable). Trend assertions encode the
orderings the grids are expected to reproduce; violations are reported,
not raised. All randomness derives from one top-level seed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .assets import test_images, training_images
from .dictionaries import BaseDictionary, ksvd_learn
from .patches import add_gaussian_noise, psnr
from .pipelines import (
    DenoiseJob,
    ScaleOperators,
    SRJob,
    bicubic_upscale,
    default_solver_config,
    denoise,
    dict_sizes_from_ratio,
    external_patch_pool,
    prepare_sr_dictionaries,
    super_resolve,
)

__all__ = [
    "ExperimentTable",
    "run_table1",
    "run_table2",
    "run_table3",
    "run_table4",
    "PAPER_TABLE2",
    "PAPER_TABLE3",
]

SIGMA_GRID = (10, 20, 30, 40, 50)
R_GRID = (0, 1, 3, 4, 7, 9, 15)
TABLE2_METHODS = ("ksvd_g", "ksvd_s", "ksvd_c", "sc_fw", "sc_lw")

# Published reference values (dB), layout-matched: rows are methods /
# r-values, columns are sigma in SIGMA_GRID order.
PAPER_TABLE2 = {
    "ksvd_g": (33.57, 30.18, 28.83, 26.43, 25.32),
    "ksvd_s": (34.23, 31.02, 28.94, 26.66, 25.48),
    "ksvd_c": (34.46, 32.24, 29.62, 26.76, 25.67),
    "sc_fw": (34.83, 33.45, 30.28, 26.27, 25.32),
    "sc_lw": (36.27, 34.24, 32.83, 28.76, 26.32),
}
PAPER_TABLE3 = {
    0: (30.47, 28.48, 27.67, 26.20, 24.06),
    1: (32.23, 30.27, 29.95, 26.82, 25.03),
    3: (35.46, 33.27, 31.80, 28.97, 26.21),
    4: (36.27, 34.24, 32.83, 28.76, 26.32),
    7: (36.18, 34.05, 32.58, 28.94, 26.37),
    9: (36.07, 33.84, 31.73, 28.31, 26.02),
    15: (34.57, 31.28, 30.80, 27.67, 25.83),
}
# Table I (KNN bases, sigma = 10) and Table IV (x3 SR) use the paper's own
# test images; embedded as clearly-labeled context rows.
PAPER_TABLE1 = {
    "method_i_knn": {"lena": 35.57, "barbara": 33.98, "boats": 33.83, "house": 33.56, "peppers": 34.93},
    "method_ii": {"lena": 31.21, "barbara": 30.41, "boats": 31.24, "house": 29.43, "peppers": 30.67},
    "method_iii": {"lena": 35.36, "barbara": 34.24, "boats": 33.62, "house": 34.76, "peppers": 34.32},
}
PAPER_TABLE4 = {
    "bicubic": {"temple": 25.29, "train": 26.14, "leopard": 24.14},
    "proposed": {"temple": 26.86, "train": 27.44, "leopard": 25.62},
}


@dataclass
class ExperimentTable:
    """Grid results: one row per cell, plus trend-assertion outcomes.

    `failure` carries the first cell error when a grid could only be
    partially executed; completed rows are still emitted.
    """

    name: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    failure: str | None = None

    def add(self, **cell) -> None:
        self.rows.append(cell)

    def _formatted(self) -> list[list[str]]:
        out = []
        for row in self.rows:
            line = []
            for col in self.columns:
                v = row.get(col, "")
                if isinstance(v, float):
                    line.append(f"{v:.3f}")
                else:
                    line.append(str(v))
            out.append(line)
        return out

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for line in self._formatted():
            lines.append(",".join(line))
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        """Aligned Markdown table with numeric content identical to the CSV."""
        body = self._formatted()
        widths = [max(len(c), *(len(r[i]) for r in body)) if body else len(c)
                  for i, c in enumerate(self.columns)]
        def fmt(cells):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
        lines = [fmt(self.columns), fmt(["-" * w for w in widths])]
        lines.extend(fmt(r) for r in body)
        return "\n".join(lines) + "\n"


def _noise_seed(seed: int, image_index: int, sigma: float) -> int:
    return int(seed) * 10007 + image_index * 101 + int(round(sigma))


def _select_images(names: list[str] | None) -> dict[str, np.ndarray]:
    bundle = test_images()
    if names is None:
        return bundle
    missing = [n for n in names if n not in bundle]
    if missing:
        raise ValueError(f"unknown bundled images {missing}; have {sorted(bundle)}")
    return {n: bundle[n] for n in names}


def _global_dictionary(m_atoms: int, seed: int, ksvd_iterations: int,
                       cache: dict) -> BaseDictionary | None:
    if m_atoms == 0:
        return None
    key = (m_atoms, seed, ksvd_iterations)
    if key not in cache:
        pool = external_patch_pool(training_images(), rng_seed=seed)
        cache[key] = ksvd_learn(pool, m_atoms, 3, ksvd_iterations, seed)
    return cache[key]


def run_table1(images: list[str] | None = None, sigma: float = 10.0, seed: int = 0,
               m_atoms: int = 128, n_atoms: int = 32,
               progress=None) -> ExperimentTable:
    """KNN-base comparison: adaptive weights (I), plain SC (II), K-SVD bases (III)."""
    table = ExperimentTable("table1", ["method", "image", "psnr_db", "runtime_s"])
    bundle = _select_images(images)
    pool = external_patch_pool(training_images(), rng_seed=seed)
    scores: dict[str, dict[str, float]] = {}
    for idx, (name, clean) in enumerate(bundle.items()):
        noisy = add_gaussian_noise(clean, sigma, _noise_seed(seed, idx, sigma))
        for method in ("method_i_knn", "method_ii", "method_iii"):
            if progress:
                progress(f"table1 {name} {method}")
            job = DenoiseJob(noisy, sigma, method, m_atoms=m_atoms, n_atoms=n_atoms,
                             rng_seed=seed)
            try:
                out, rep = denoise(job, pool, reference=clean)
            except Exception as err:
                table.failure = f"table1 {name} {method}: {err}"
                return table
            table.add(method=method, image=name, psnr_db=rep["psnr_db"],
                      runtime_s=rep["runtime_s"])
            scores.setdefault(method, {})[name] = rep["psnr_db"]
    for method, cells in PAPER_TABLE1.items():
        for image, value in cells.items():
            table.add(method=method, image=f"paper:{image}", psnr_db=value, runtime_s="")
    for name in bundle:
        i, ii = scores["method_i_knn"][name], scores["method_ii"][name]
        if not i > ii:
            table.violations.append(
                f"table1: adaptive weights did not beat plain SC on {name} ({i:.3f} <= {ii:.3f})")
    return table


def run_table2(images: list[str] | None = None, sigmas=SIGMA_GRID,
               methods=TABLE2_METHODS, seed: int = 0, m_atoms: int = 128,
               n_atoms: int = 32, ksvd_iterations: int = 20,
               progress=None) -> ExperimentTable:
    """Denoising methods x sigma grid; cells average over the test images."""
    table = ExperimentTable(
        "table2", ["method", "sigma", "psnr_db", "paper_psnr_db", "runtime_s"])
    bundle = _select_images(images)
    cache: dict = {}
    gdict = _global_dictionary(m_atoms, seed, ksvd_iterations, cache)
    averages: dict[tuple, float] = {}
    noisy_avg: dict[float, float] = {}
    for sigma in sigmas:
        noisies = {}
        for idx, (name, clean) in enumerate(bundle.items()):
            noisies[name] = add_gaussian_noise(clean, sigma, _noise_seed(seed, idx, sigma))
        noisy_avg[sigma] = float(np.mean([psnr(bundle[n], noisies[n]) for n in bundle]))
        for method in methods:
            t0 = time.perf_counter()
            vals = []
            for name, clean in bundle.items():
                if progress:
                    progress(f"table2 sigma={sigma} {method} {name}")
                job = DenoiseJob(noisies[name], sigma, method, m_atoms=m_atoms,
                                 n_atoms=n_atoms, ksvd_iterations=ksvd_iterations,
                                 rng_seed=seed)
                try:
                    out, rep = denoise(job, gdict, reference=clean)
                except Exception as err:
                    table.failure = f"table2 sigma={sigma} {method} {name}: {err}"
                    return table
                vals.append(rep["psnr_db"])
            avg = float(np.mean(vals))
            averages[(method, sigma)] = avg
            ref = ""
            if method in PAPER_TABLE2 and sigma in SIGMA_GRID:
                ref = PAPER_TABLE2[method][SIGMA_GRID.index(sigma)]
            table.add(method=method, sigma=sigma, psnr_db=avg, paper_psnr_db=ref,
                      runtime_s=round(time.perf_counter() - t0, 3))

    for sigma in sigmas:
        if sigma not in (10, 20):
            continue
        have = {m for m in ("ksvd_g", "ksvd_s", "ksvd_c", "sc_lw") if (m, sigma) in averages}
        if {"ksvd_g", "ksvd_s", "ksvd_c"} <= have:
            best_single = max(averages[("ksvd_g", sigma)], averages[("ksvd_s", sigma)])
            if not averages[("ksvd_c", sigma)] >= best_single - 0.1:
                table.violations.append(
                    f"table2 sigma={sigma}: composite below best single dictionary "
                    f"({averages[('ksvd_c', sigma)]:.3f} < {best_single:.3f} - 0.1)")
        if {"ksvd_c", "sc_lw"} <= have:
            if not averages[("sc_lw", sigma)] >= averages[("ksvd_c", sigma)]:
                table.violations.append(
                    f"table2 sigma={sigma}: learned weights below plain composite "
                    f"({averages[('sc_lw', sigma)]:.3f} < {averages[('ksvd_c', sigma)]:.3f})")
        for method in have:
            if not averages[(method, sigma)] > noisy_avg[sigma]:
                table.violations.append(
                    f"table2 sigma={sigma}: {method} did not beat the noisy input")
    return table


def run_table3(images: list[str] | None = None, sigmas=(10,), r_values=R_GRID,
               total_atoms: int = 160, seed: int = 0, ksvd_iterations: int = 20,
               progress=None) -> ExperimentTable:
    """Learned-weight solver under the (global : specific) atom-ratio sweep."""
    table = ExperimentTable(
        "table3", ["r", "sigma", "m_atoms", "n_atoms", "psnr_db", "paper_psnr_db", "runtime_s"])
    bundle = _select_images(images)
    cache: dict = {}
    averages: dict[tuple, float] = {}
    for sigma in sigmas:
        noisies = {}
        for idx, (name, clean) in enumerate(bundle.items()):
            noisies[name] = add_gaussian_noise(clean, sigma, _noise_seed(seed, idx, sigma))
        for r in r_values:
            m_atoms, n_atoms = dict_sizes_from_ratio(r, total_atoms)
            gdict = _global_dictionary(m_atoms, seed, ksvd_iterations, cache)
            t0 = time.perf_counter()
            vals = []
            for name, clean in bundle.items():
                if progress:
                    progress(f"table3 sigma={sigma} r={r} {name}")
                job = DenoiseJob(noisies[name], sigma, "sc_lw", m_atoms=m_atoms,
                                 n_atoms=n_atoms, ksvd_iterations=ksvd_iterations,
                                 rng_seed=seed)
                try:
                    out, rep = denoise(job, gdict, reference=clean)
                except Exception as err:
                    table.failure = f"table3 sigma={sigma} r={r} {name}: {err}"
                    return table
                vals.append(rep["psnr_db"])
            avg = float(np.mean(vals))
            averages[(r, sigma)] = avg
            ref = ""
            if r in PAPER_TABLE3 and sigma in SIGMA_GRID:
                ref = PAPER_TABLE3[r][SIGMA_GRID.index(sigma)]
            table.add(r=r, sigma=sigma, m_atoms=m_atoms, n_atoms=n_atoms, psnr_db=avg,
                      paper_psnr_db=ref, runtime_s=round(time.perf_counter() - t0, 3))

    for sigma in sigmas:
        if sigma != 10:
            continue
        if (0, sigma) in averages and (4, sigma) in averages:
            if not averages[(0, sigma)] < averages[(4, sigma)] - 0.2:
                table.violations.append(
                    f"table3: r=0 not below r=4 by 0.2 dB "
                    f"({averages[(0, sigma)]:.3f} vs {averages[(4, sigma)]:.3f})")
        if (15, sigma) in averages and (4, sigma) in averages:
            if not averages[(15, sigma)] < averages[(4, sigma)] - 0.2:
                table.violations.append(
                    f"table3: r=15 not below r=4 by 0.2 dB "
                    f"({averages[(15, sigma)]:.3f} vs {averages[(4, sigma)]:.3f})")
    return table


def run_table4(images: list[str] | None = None, factor: int = 3, seed: int = 0,
               m_atoms: int = 128, n_atoms: int = 32, ksvd_iterations: int = 15,
               window_radius: int = 4, progress=None) -> ExperimentTable:
    """x3 super-resolution of downscaled test tiles vs the bicubic baseline."""
    table = ExperimentTable("table4", ["method", "image", "psnr_db", "runtime_s"])
    bundle = _select_images(images)
    train = training_images()
    ops = ScaleOperators(factor)
    for idx, (name, hr) in enumerate(bundle.items()):
        h = (hr.shape[0] // factor) * factor
        w = (hr.shape[1] // factor) * factor
        hr = hr[:h, :w]
        lr = ops.downsample(hr)
        t0 = time.perf_counter()
        bic = bicubic_upscale(lr, factor)
        bic_psnr = psnr(hr, bic)
        table.add(method="bicubic", image=name, psnr_db=bic_psnr,
                  runtime_s=round(time.perf_counter() - t0, 3))
        if progress:
            progress(f"table4 {name} proposed")
        t0 = time.perf_counter()
        try:
            gpair, spair = prepare_sr_dictionaries(
                lr, train, ops, m_atoms, n_atoms, window_radius,
                iterations=ksvd_iterations, rng_seed=seed)
            job = SRJob(lr, gpair, spair, factor=factor, window_radius=window_radius,
                        rng_seed=seed)
            out, rep = super_resolve(job, reference=hr)
        except Exception as err:
            table.failure = f"table4 {name} proposed: {err}"
            return table
        table.add(method="proposed", image=name, psnr_db=rep["psnr_db"],
                  runtime_s=round(time.perf_counter() - t0, 3))
        if not rep["psnr_db"] > bic_psnr:
            table.violations.append(
                f"table4: proposed did not beat bicubic on {name} "
                f"({rep['psnr_db']:.3f} <= {bic_psnr:.3f})")
    for method, cells in PAPER_TABLE4.items():
        for image, value in cells.items():
            table.add(method=method, image=f"paper:{image}", psnr_db=value, runtime_s="")
    return table
