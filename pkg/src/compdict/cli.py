"""Command-line front end: dictionary training, restoration, experiments.

Subcommands: train-dict, denoise, sr, experiment, eval-psnr. Every
subcommand accepts --config pointing at a JSON file whose keys mirror the
long flag names (hyphens as underscores); explicit flags override file
values, unknown file keys are rejected, and the fully resolved
configuration (seed included) is written next to the primary output as
<output>.config.json.

Exit codes: 0 success (and, for experiments, all trend assertions hold),
2 trend assertions violated, 1 execution error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import experiments
from .assets import asset_names, test_images, training_images
from .dictionaries import load_dictionary, save_dictionary
from .imgio import load_image, save_image
from .patches import psnr
from .pipelines import (
    DENOISE_METHODS,
    DenoiseJob,
    ScaleOperators,
    SRJob,
    bicubic_upscale,
    coupled_learn,
    denoise,
    dict_sizes_from_ratio,
    external_pair_pool,
    external_patch_pool,
    knn_global_base,
    ksvd_learn,
    prepare_sr_dictionaries,
    super_resolve,
)
from .solver import SolverConfig


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the exit-code contract reserves 2
    # for violated trend assertions, so usage errors become code 1
    def error(self, message):
        raise _UsageError(message)


def _load_corpus(train_dir: str | None, use_bundled: bool) -> list[np.ndarray] | None:
    if train_dir:
        names = sorted(
            f for f in os.listdir(train_dir) if f.lower().endswith((".png", ".pgm")))
        if not names:
            raise _UsageError(f"no .png/.pgm images in training directory {train_dir!r}")
        return [load_image(os.path.join(train_dir, f)) for f in names]
    if use_bundled:
        return training_images()
    return None


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults < config file < explicit flags; reject unknown keys."""
    provided = {k: v for k, v in vars(args).items()
                if k not in ("func", "config") and v is not _SUPPRESS}
    resolved = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path) as fh:
            file_cfg = json.load(fh)
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise _UsageError(f"unknown config keys {unknown}; known: {sorted(defaults)}")
        resolved.update(file_cfg)
    resolved.update(provided)
    return resolved


def _write_resolved(cfg: dict, anchor_path: str) -> None:
    path = anchor_path + ".config.json"
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


_SUPPRESS = argparse.SUPPRESS


def _add(parser: _Parser, defaults: dict, name: str, default, **kw) -> None:
    key = name.lstrip("-").replace("-", "_")
    defaults[key] = default
    if isinstance(default, bool):
        kw.setdefault("action", "store_true")
    elif default is not None and "type" not in kw and "choices" not in kw:
        kw["type"] = type(default)
    parser.add_argument(name, default=_SUPPRESS, **kw)


def _solver_from(cfg: dict, sigma: float) -> SolverConfig:
    from .pipelines import default_solver_config

    base = default_solver_config(sigma, cfg["seed"])
    overrides = {}
    for key in ("lambda_e", "lambda_i", "omega_g", "omega_s", "beta", "iterations"):
        if cfg.get(key) is not None:
            overrides[key] = cfg[key]
    if not overrides:
        return base
    merged = dict(lambda_e=base.lambda_e, lambda_i=base.lambda_i, beta=base.beta,
                  iterations=base.iterations, omega_g=base.omega_g,
                  omega_s=base.omega_s, rng_seed=base.rng_seed)
    merged.update(overrides)
    return SolverConfig(**merged)


# --- train-dict ------------------------------------------------------------

TRAIN_DEFAULTS: dict = {}


def _build_train(sub) -> None:
    p = sub.add_parser("train-dict", help="train and serialize a base dictionary")
    d = TRAIN_DEFAULTS
    _add(p, d, "--out", "dictionary.bin", help="output path for the binary dictionary")
    _add(p, d, "--train-dir", None, type=str, help="directory of training images")
    _add(p, d, "--use-bundled", False, help="train on the bundled corpus")
    _add(p, d, "--kind", "ksvd", choices=("ksvd", "knn"), help="learning method")
    _add(p, d, "--atoms", 128, help="dictionary size M")
    _add(p, d, "--sparsity", 3, help="OMP target sparsity inside K-SVD")
    _add(p, d, "--iterations", 20, help="K-SVD iterations")
    _add(p, d, "--stride", 3, help="patch sampling stride over training images")
    _add(p, d, "--max-examples", 40000, help="training pool cap")
    _add(p, d, "--coupled", False, help="train a coupled (high, low) pair for SR")
    _add(p, d, "--factor", 3, help="scale factor for --coupled")
    _add(p, d, "--seed", 0, help="top-level rng seed")
    p.add_argument("--config", default=None, help="JSON config file")
    p.set_defaults(func=_cmd_train)


def _cmd_train(args) -> int:
    cfg = _resolve(args, TRAIN_DEFAULTS)
    corpus = _load_corpus(cfg["train_dir"], cfg["use_bundled"])
    if corpus is None:
        raise _UsageError("pass --train-dir DIR or --use-bundled")
    source = cfg["train_dir"] or "bundled"
    provenance = {k: cfg[k] for k in sorted(cfg)}
    provenance["pool_source"] = source
    if cfg["coupled"]:
        ops = ScaleOperators(cfg["factor"])
        pairs = external_pair_pool(corpus, ops, stride=cfg["stride"],
                                   max_pairs=cfg["max_examples"], rng_seed=cfg["seed"])
        mu = pairs.low.mean(axis=1, keepdims=True)
        from .dictionaries import PairedExamplePool
        pairs = PairedExamplePool(pairs.high - mu, pairs.low - mu, "external")
        pair = coupled_learn(pairs, cfg["atoms"], cfg["sparsity"], cfg["iterations"],
                             cfg["seed"])
        provenance["n_pairs"] = len(pairs)
        save_dictionary(pair.high, cfg["out"] + ".high", provenance)
        save_dictionary(pair.low, cfg["out"] + ".low", provenance)
        print(f"wrote {cfg['out']}.high and {cfg['out']}.low ({cfg['atoms']} atoms)")
    else:
        pool = external_patch_pool(corpus, stride=cfg["stride"],
                                   max_examples=cfg["max_examples"], rng_seed=cfg["seed"])
        provenance["n_examples"] = len(pool)
        if cfg["kind"] == "knn":
            base = knn_global_base(pool, cfg["atoms"], cfg["seed"])
        else:
            base = ksvd_learn(pool, cfg["atoms"], cfg["sparsity"], cfg["iterations"],
                              cfg["seed"])
        save_dictionary(base, cfg["out"], provenance)
        print(f"wrote {cfg['out']} ({base.count} atoms, {base.p} dims)")
    _write_resolved(cfg, cfg["out"])
    return 0


# --- denoise ---------------------------------------------------------------

DENOISE_DEFAULTS: dict = {}


def _build_denoise(sub) -> None:
    p = sub.add_parser("denoise", help="denoise one image with a chosen method")
    d = DENOISE_DEFAULTS
    _add(p, d, "--input", "noisy.png", help="noisy input image (png/pgm)")
    _add(p, d, "--sigma", 10.0, help="known gaussian noise std, [0,255] scale")
    _add(p, d, "--method", "sc_lw", choices=DENOISE_METHODS)
    _add(p, d, "--out", "denoised.png", help="restored image path")
    _add(p, d, "--report", None, type=str, help="JSON report path (default <out>.report.json)")
    _add(p, d, "--reference", None, type=str, help="clean reference for PSNR")
    _add(p, d, "--global-dict", None, type=str, help="pre-trained global dictionary file")
    _add(p, d, "--train-dir", None, type=str, help="train the global side from this directory")
    _add(p, d, "--use-bundled-train", False, help="train the global side on the bundled corpus")
    _add(p, d, "--m-atoms", 128, help="global atoms M")
    _add(p, d, "--n-atoms", 32, help="specific atoms N")
    _add(p, d, "--ratio", None, type=float,
         help="atom ratio r; overrides --m-atoms/--n-atoms via a fixed total")
    _add(p, d, "--total-atoms", 160, help="total atoms used with --ratio")
    _add(p, d, "--ksvd-iterations", 20, help="K-SVD iterations for both dictionaries")
    _add(p, d, "--lambda-e", None, type=float, help="override the noise-scaled penalty")
    _add(p, d, "--lambda-i", None, type=float, help="override the specific-block penalty")
    _add(p, d, "--omega-g", None, type=float, help="override the global RBF constant")
    _add(p, d, "--omega-s", None, type=float, help="override the specific RBF constant")
    _add(p, d, "--beta", None, type=float, help="override the metric step size")
    _add(p, d, "--iterations", None, type=int, help="override the solver iteration count")
    _add(p, d, "--seed", 0, help="top-level rng seed")
    p.add_argument("--config", default=None, help="JSON config file")
    p.set_defaults(func=_cmd_denoise)


def _train_hint(cfg) -> str:
    return ("no usable global dictionary: pass --global-dict FILE, or train one first, "
            "e.g. `compdict train-dict --use-bundled --atoms "
            f"{cfg['m_atoms']} --out global.bin`, or pass --train-dir/--use-bundled-train")


def _cmd_denoise(args) -> int:
    cfg = _resolve(args, DENOISE_DEFAULTS)
    noisy = load_image(cfg["input"])
    reference = load_image(cfg["reference"]) if cfg["reference"] else None
    m_atoms, n_atoms = cfg["m_atoms"], cfg["n_atoms"]
    if cfg["ratio"] is not None:
        m_atoms, n_atoms = dict_sizes_from_ratio(cfg["ratio"], cfg["total_atoms"])

    knn_method = cfg["method"] in ("method_i_knn", "method_ii")
    corpus = _load_corpus(cfg["train_dir"], cfg["use_bundled_train"])
    external = None
    if corpus is not None:
        external = external_patch_pool(corpus, rng_seed=cfg["seed"])
    elif cfg["global_dict"]:
        if knn_method:
            raise _UsageError("KNN methods rebuild their base from a patch pool; "
                              "pass --train-dir or --use-bundled-train instead of --global-dict")
        if not os.path.exists(cfg["global_dict"]):
            raise _UsageError(f"dictionary file {cfg['global_dict']!r} not found; "
                              "create it with `compdict train-dict`")
        external = load_dictionary(cfg["global_dict"])
        m_atoms = external.count
    elif cfg["method"] != "ksvd_s" and m_atoms > 0:
        raise _UsageError(_train_hint(cfg))

    job = DenoiseJob(noisy, cfg["sigma"], cfg["method"], m_atoms=m_atoms,
                     n_atoms=n_atoms, ksvd_iterations=cfg["ksvd_iterations"],
                     rng_seed=cfg["seed"], solver=_solver_from(cfg, cfg["sigma"]))
    out, report = denoise(job, external, reference=reference)
    save_image(out, cfg["out"])
    report["input"] = cfg["input"]
    report["output"] = cfg["out"]
    report_path = cfg["report"] or cfg["out"] + ".report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_resolved(cfg, cfg["out"])
    if "psnr_db" in report:
        print(f"psnr: {report['psnr_db']:.4f} dB (noisy {report['psnr_noisy_db']:.4f} dB)")
    print(f"wrote {cfg['out']} and {report_path}")
    return 0


# --- sr ---------------------------------------------------------------------

SR_DEFAULTS: dict = {}


def _build_sr(sub) -> None:
    p = sub.add_parser("sr", help="single-image super-resolution")
    d = SR_DEFAULTS
    _add(p, d, "--input", "lr.png", help="low-resolution input image")
    _add(p, d, "--factor", 3, help="upscaling factor")
    _add(p, d, "--method", "proposed", choices=("proposed", "bicubic"))
    _add(p, d, "--out", "sr.png", help="upscaled image path")
    _add(p, d, "--report", None, type=str, help="JSON report path (default <out>.report.json)")
    _add(p, d, "--reference", None, type=str, help="ground-truth HR image for PSNR")
    _add(p, d, "--train-dir", None, type=str, help="HR training images for the coupled pair")
    _add(p, d, "--use-bundled-train", False, help="train on the bundled corpus")
    _add(p, d, "--coupled-dict", None, type=str,
         help="prefix of a serialized coupled pair (<prefix>.high/.low)")
    _add(p, d, "--m-atoms", 128, help="global pair atoms")
    _add(p, d, "--n-atoms", 32, help="specific pair atoms")
    _add(p, d, "--window-radius", 4, help="cross-scale search window radius, LR pixels")
    _add(p, d, "--ksvd-iterations", 15, help="coupled K-SVD iterations")
    _add(p, d, "--seed", 0, help="top-level rng seed")
    p.add_argument("--config", default=None, help="JSON config file")
    p.set_defaults(func=_cmd_sr)


def _cmd_sr(args) -> int:
    cfg = _resolve(args, SR_DEFAULTS)
    lr = load_image(cfg["input"])
    reference = load_image(cfg["reference"]) if cfg["reference"] else None
    report = {"method": cfg["method"], "factor": cfg["factor"], "input": cfg["input"]}
    if cfg["method"] == "bicubic":
        out = bicubic_upscale(lr, cfg["factor"])
        if reference is not None:
            report["psnr_db"] = psnr(reference, out)
    else:
        ops = ScaleOperators(cfg["factor"])
        if cfg["coupled_dict"]:
            gpair = _load_coupled(cfg["coupled_dict"])
            corpus = None
        else:
            corpus = _load_corpus(cfg["train_dir"], cfg["use_bundled_train"])
            if corpus is None:
                raise _UsageError(
                    "the proposed method needs a coupled pair: pass --coupled-dict PREFIX "
                    "(train one with `compdict train-dict --coupled --use-bundled --out PREFIX`) "
                    "or --train-dir/--use-bundled-train")
            gpair = None
        from .dictionaries import PairedExamplePool
        from .pipelines import _mean_removed_pairs, build_internal_pairs

        if gpair is None:
            gpair, spair = prepare_sr_dictionaries(
                lr, corpus, ops, cfg["m_atoms"], cfg["n_atoms"], cfg["window_radius"],
                iterations=cfg["ksvd_iterations"], rng_seed=cfg["seed"])
        else:
            internal = _mean_removed_pairs(
                build_internal_pairs(lr / 255.0, ops, cfg["window_radius"]))
            keep = np.linalg.norm(internal.low, axis=1) >= 1e-8
            pool = PairedExamplePool(internal.high[keep], internal.low[keep], "internal")
            spair = coupled_learn(pool, cfg["n_atoms"], 3, cfg["ksvd_iterations"],
                                  cfg["seed"])
        job = SRJob(lr, gpair, spair, factor=cfg["factor"],
                    window_radius=cfg["window_radius"], rng_seed=cfg["seed"])
        out, rep = super_resolve(job, reference=reference)
        report.update(rep)
    save_image(out, cfg["out"])
    report["output"] = cfg["out"]
    report_path = cfg["report"] or cfg["out"] + ".report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_resolved(cfg, cfg["out"])
    if "psnr_db" in report:
        print(f"psnr: {report['psnr_db']:.4f} dB")
    print(f"wrote {cfg['out']} and {report_path}")
    return 0


def _load_coupled(prefix: str):
    from .dictionaries import CoupledDictionaryPair

    for suffix in (".high", ".low"):
        if not os.path.exists(prefix + suffix):
            raise _UsageError(
                f"coupled dictionary file {prefix + suffix!r} not found; train it with "
                "`compdict train-dict --coupled --use-bundled --out " + prefix + "`")
    return CoupledDictionaryPair(load_dictionary(prefix + ".high"),
                                 load_dictionary(prefix + ".low"))


# --- experiment --------------------------------------------------------------

EXPERIMENT_DEFAULTS: dict = {}


def _build_experiment(sub) -> None:
    p = sub.add_parser("experiment", help="run a full experiment grid")
    d = EXPERIMENT_DEFAULTS
    p.add_argument("table", choices=("table1", "table2", "table3", "table4"))
    _add(p, d, "--out-dir", "experiments", help="output directory")
    _add(p, d, "--images", None, type=str, nargs="+",
         help=f"bundled image subset (default all: {asset_names()['test']})")
    _add(p, d, "--sigmas", None, type=float, nargs="+",
         help="noise levels (tables 1 to 3)")
    _add(p, d, "--r-values", None, type=int, nargs="+", help="atom ratios (table3)")
    _add(p, d, "--m-atoms", 128, help="global atoms (tables 1, 2, 4)")
    _add(p, d, "--n-atoms", 32, help="specific atoms (tables 1, 2, 4)")
    _add(p, d, "--total-atoms", 160, help="fixed atom budget (table3)")
    _add(p, d, "--factor", 3, help="SR factor (table4)")
    _add(p, d, "--ksvd-iterations", 20, help="K-SVD iterations")
    _add(p, d, "--seed", 0, help="top-level rng seed")
    _add(p, d, "--quiet", False, help="suppress progress lines")
    p.add_argument("--config", default=None, help="JSON config file")
    p.set_defaults(func=_cmd_experiment)


def _cmd_experiment(args) -> int:
    cfg = _resolve(args, EXPERIMENT_DEFAULTS)
    cfg["table"] = args.table
    os.makedirs(cfg["out_dir"], exist_ok=True)
    progress = None if cfg["quiet"] else lambda msg: print(f"  [{msg}]", file=sys.stderr)

    table_name = args.table
    if table_name == "table1":
        sigmas = cfg["sigmas"] or [10.0]
        table = experiments.run_table1(cfg["images"], sigmas[0], cfg["seed"],
                                       cfg["m_atoms"], cfg["n_atoms"], progress=progress)
    elif table_name == "table2":
        table = experiments.run_table2(cfg["images"],
                                       tuple(cfg["sigmas"] or experiments.SIGMA_GRID),
                                       seed=cfg["seed"], m_atoms=cfg["m_atoms"],
                                       n_atoms=cfg["n_atoms"],
                                       ksvd_iterations=cfg["ksvd_iterations"],
                                       progress=progress)
    elif table_name == "table3":
        table = experiments.run_table3(cfg["images"],
                                       tuple(cfg["sigmas"] or (10,)),
                                       tuple(cfg["r_values"] or experiments.R_GRID),
                                       cfg["total_atoms"], cfg["seed"],
                                       cfg["ksvd_iterations"], progress=progress)
    else:
        table = experiments.run_table4(cfg["images"], cfg["factor"], cfg["seed"],
                                       cfg["m_atoms"], cfg["n_atoms"],
                                       cfg["ksvd_iterations"], progress=progress)

    base = os.path.join(cfg["out_dir"], table_name)
    with open(base + ".csv", "w") as fh:
        fh.write(table.to_csv())
    with open(base + ".md", "w") as fh:
        fh.write(table.to_markdown())
    manifest = {
        "table": table_name,
        "rows": table.rows,
        "violations": table.violations,
        "failure": table.failure,
        "config": cfg,
    }
    with open(base + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    _write_resolved(cfg, base)
    print(f"wrote {base}.csv, {base}.md, {base}.manifest.json")
    if table.failure:
        print(f"FAILURE (partial grid): {table.failure}", file=sys.stderr)
        return 1
    if table.violations:
        for v in table.violations:
            print(f"TREND VIOLATION: {v}", file=sys.stderr)
        return 2
    print("all trend assertions hold")
    return 0


# --- eval-psnr ----------------------------------------------------------------

EVAL_DEFAULTS: dict = {}


def _build_eval(sub) -> None:
    p = sub.add_parser("eval-psnr", help="PSNR between two images")
    d = EVAL_DEFAULTS
    _add(p, d, "--reference", "ref.png", help="reference image")
    _add(p, d, "--test", "test.png", help="image under test")
    p.add_argument("--config", default=None, help="JSON config file")
    p.set_defaults(func=_cmd_eval)


def _cmd_eval(args) -> int:
    cfg = _resolve(args, EVAL_DEFAULTS)
    value = psnr(load_image(cfg["reference"]), load_image(cfg["test"]))
    print(f"psnr: {value:.4f} dB" if np.isfinite(value) else "psnr: inf dB")
    return 0


# --- entry point ---------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="compdict",
                     description="composite-dictionary sparse coding for image restoration")
    sub = parser.add_subparsers(dest="command", required=True)
    _build_train(sub)
    _build_denoise(sub)
    _build_sr(sub)
    _build_experiment(sub)
    _build_eval(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:   # execution error contract
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
