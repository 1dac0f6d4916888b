"""Per-atom similarity weights and their gradients.

Every atom's contribution to the reconstruction is scaled by a similarity
weight between the atom d and the input patch x: either the fixed RBF form

    w = exp(-omega * ||d - x||^2)

or the learnable Mahalanobis form

    w = exp(-(d - x)^T Omega (d - x)),    Omega = F^T F,

with F an unconstrained p x p matrix so Omega stays positive semi-definite
without explicit constraints. Weights always lie in [0, 1]; quadratic
forms are clamped at 700 before exponentiation and weights below 1e-300
are flushed to exact zero, which marks the atom inactive.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .dictionaries import CompositeDictionary
from .sparse_coding import SparseCode

__all__ = [
    "FixedRBFParams",
    "MahalanobisParams",
    "WeightVector",
    "rbf_weight",
    "mahalanobis_weight",
    "rbf_weight_matrix",
    "mahalanobis_weight_matrix",
    "composite_weights",
    "weight_gradient_F",
    "save_mahalanobis",
    "load_mahalanobis",
]

QUAD_CLAMP = 700.0
WEIGHT_FLUSH = 1e-300


@dataclass(frozen=True)
class FixedRBFParams:
    """RBF decay constants; the specific part must decay faster."""

    omega_g: float
    omega_s: float

    def __post_init__(self):
        if not (self.omega_s > self.omega_g > 0):
            raise ValueError("required: omega_s > omega_g > 0")


@dataclass(frozen=True)
class MahalanobisParams:
    """Unconstrained factors F of the two learnable metrics."""

    f_global: np.ndarray
    f_specific: np.ndarray

    def __post_init__(self):
        fg = np.asarray(self.f_global, dtype=np.float64)
        fs = np.asarray(self.f_specific, dtype=np.float64)
        if fg.ndim != 2 or fg.shape[0] != fg.shape[1] or fg.shape != fs.shape:
            raise ValueError("F_G and F_S must be square matrices of equal shape")
        object.__setattr__(self, "f_global", fg)
        object.__setattr__(self, "f_specific", fs)

    @property
    def omega_global(self) -> np.ndarray:
        """The PSD metric F_G^T F_G."""
        return self.f_global.T @ self.f_global

    @property
    def omega_specific(self) -> np.ndarray:
        return self.f_specific.T @ self.f_specific


@dataclass(frozen=True)
class WeightVector:
    """Weights for one input patch, split like the composite dictionary."""

    global_weights: np.ndarray
    specific_weights: np.ndarray

    def __post_init__(self):
        for name in ("global_weights", "specific_weights"):
            w = np.asarray(getattr(self, name), dtype=np.float64)
            if w.size and (w.min() < 0.0 or w.max() > 1.0):
                raise ValueError("weights must lie in [0, 1]")
            object.__setattr__(self, name, w)

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.global_weights, self.specific_weights])


def _exp_neg(quad: np.ndarray | float):
    q = np.minimum(quad, QUAD_CLAMP)
    w = np.exp(-q)
    return np.where(w < WEIGHT_FLUSH, 0.0, w)


def rbf_weight(atom: np.ndarray, x: np.ndarray, omega: float) -> float:
    """exp(-omega * ||atom - x||^2); 1.0 iff atom == x."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    d = np.subtract(atom, x, dtype=np.float64)
    return float(_exp_neg(omega * (d @ d)))


def mahalanobis_weight(atom: np.ndarray, x: np.ndarray, f_matrix: np.ndarray) -> float:
    """exp(-||F (atom - x)||^2), the Mahalanobis kernel with Omega = F^T F."""
    d = np.subtract(atom, x, dtype=np.float64)
    v = np.asarray(f_matrix, dtype=np.float64) @ d
    return float(_exp_neg(v @ v))


def rbf_weight_matrix(atoms: np.ndarray, signals: np.ndarray, omega: float) -> np.ndarray:
    """RBF weights for a batch: (n_signals, n_atoms) from (p, K) and (n, p)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    quad = omega * _cross_sq_norms(atoms, signals, np.eye(atoms.shape[0]))
    return _exp_neg(quad)


def mahalanobis_weight_matrix(atoms: np.ndarray, signals: np.ndarray, f_matrix: np.ndarray) -> np.ndarray:
    """Mahalanobis weights for a batch: (n_signals, n_atoms)."""
    quad = _cross_sq_norms(atoms, signals, np.asarray(f_matrix, dtype=np.float64))
    return _exp_neg(quad)


def _cross_sq_norms(atoms: np.ndarray, signals: np.ndarray, f_matrix: np.ndarray) -> np.ndarray:
    """||F(d_k - x_i)||^2 for every (signal i, atom k) pair."""
    fd = f_matrix @ atoms                 # (p, K)
    fx = signals @ f_matrix.T             # (n, p)
    q = (
        np.sum(fd**2, axis=0)[None, :]
        + np.sum(fx**2, axis=1)[:, None]
        - 2.0 * fx @ fd
    )
    return np.maximum(q, 0.0)


def composite_weights(composite: CompositeDictionary, x: np.ndarray,
                      params: FixedRBFParams | MahalanobisParams) -> WeightVector:
    """Weights of every composite atom against one input patch."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(params, FixedRBFParams):
        wg = rbf_weight_matrix(composite.global_part.atoms, x[None, :], params.omega_g)[0]
        ws = rbf_weight_matrix(composite.specific_part.atoms, x[None, :], params.omega_s)[0]
    else:
        wg = mahalanobis_weight_matrix(composite.global_part.atoms, x[None, :], params.f_global)[0]
        ws = mahalanobis_weight_matrix(composite.specific_part.atoms, x[None, :], params.f_specific)[0]
    return WeightVector(wg, ws)


def weight_gradient_F(composite: CompositeDictionary, x: np.ndarray, code: SparseCode,
                      params: MahalanobisParams, which: str) -> np.ndarray:
    """Gradient of the weighted residual term with respect to one F block.

    With r = x - sum_k d_k w_k a_k over both blocks, w_k from `params`,
    and u_k = d_k - x, the derivative through the selected block is

        dJ/dF = sum_k 4 a_k w_k (r^T d_k) F u_k u_k^T,

    with no contribution from atoms whose coefficient is zero (or whose
    weight flushed to zero).
    """
    if which not in ("global", "specific"):
        raise ValueError("which must be 'global' or 'specific'")
    x = np.asarray(x, dtype=np.float64)
    wv = composite_weights(composite, x, params)
    recon = (
        composite.global_part.atoms @ (wv.global_weights * code.global_block)
        + composite.specific_part.atoms @ (wv.specific_weights * code.specific_block)
    )
    r = x - recon
    if which == "global":
        atoms, w, a, f = composite.global_part.atoms, wv.global_weights, code.global_block, params.f_global
    else:
        atoms, w, a, f = composite.specific_part.atoms, wv.specific_weights, code.specific_block, params.f_specific
    if atoms.shape[1] == 0:
        return np.zeros_like(f)
    coef = 4.0 * a * w * (r @ atoms)      # (K,)
    u = atoms - x[:, None]                # (p, K)
    return f @ ((u * coef) @ u.T)


# --- serialization --------------------------------------------------------
#
# Same spirit as the dictionary layout: magic b"CDF1", little-endian
# uint32 p, then F_G and F_S as row-major float64, plus a JSON sidecar.

_MAGIC = b"CDF1"


def save_mahalanobis(params: MahalanobisParams, path: str | os.PathLike,
                     provenance: dict | None = None) -> None:
    p = params.f_global.shape[0]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", p))
        fh.write(np.ascontiguousarray(params.f_global).tobytes())
        fh.write(np.ascontiguousarray(params.f_specific).tobytes())
    if provenance is not None:
        with open(os.fspath(path) + ".json", "w") as fh:
            json.dump(provenance, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_mahalanobis(path: str | os.PathLike) -> MahalanobisParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a weight-parameter file (bad magic {magic!r})")
        (p,) = struct.unpack("<I", fh.read(4))
        fg = np.frombuffer(fh.read(8 * p * p), dtype="<f8").reshape(p, p).copy()
        fs = np.frombuffer(fh.read(8 * p * p), dtype="<f8").reshape(p, p).copy()
    return MahalanobisParams(fg, fs)
