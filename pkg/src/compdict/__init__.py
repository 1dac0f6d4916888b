"""Composite-dictionary sparse coding for image restoration.

External examples train a global base dictionary, the input image's own
patches train a sample-specific one, and per-atom similarity weights
(fixed RBF or learned Mahalanobis metrics) adapt the joint dictionary to
every patch. A feature-sign solver codes patches under per-block l1
penalties; denoising and x3 super-resolution pipelines sit on top.
"""
from .dictionaries import (
    BaseDictionary,
    CompositeDictionary,
    CoupledDictionaryPair,
    ExamplePool,
    PairedExamplePool,
    coupled_learn,
    knn_global_base,
    knn_specific_base,
    ksvd_learn,
    load_dictionary,
    save_dictionary,
)
from .sparse_coding import (
    FeatureSignError,
    PenaltyProfile,
    SparseCode,
    code_with_weights,
    feature_sign,
)
from .imgio import load_image, save_image
from .patches import (
    PatchDecomposition,
    add_gaussian_noise,
    extract_patches,
    psnr,
    reconstruct_overlap,
)
from .pipelines import (
    DENOISE_METHODS,
    DenoiseJob,
    ScaleOperators,
    SRJob,
    bicubic_upscale,
    build_internal_pairs,
    default_solver_config,
    denoise,
    dict_sizes_from_ratio,
    external_pair_pool,
    external_patch_pool,
    prepare_sr_dictionaries,
    super_resolve,
)
from .solver import (
    SolverConfig,
    SolverState,
    batch_code,
    batch_weights,
    coordinate_descent,
    objective,
    warm_start,
)
from .weights import (
    FixedRBFParams,
    MahalanobisParams,
    WeightVector,
    composite_weights,
    mahalanobis_weight,
    rbf_weight,
    weight_gradient_F,
)

__version__ = "0.1.0"
