"""Exact l1 sparse coding by feature-sign search with per-coefficient penalties.

Solves, for a dictionary D with columns d_k and penalties lam_k > 0,

    min_a  ||x - D a||_2^2 + sum_k lam_k |a_k|

with no 1/2 factor on the quadratic term. The active-set search follows
Lee et al.'s feature-sign algorithm, extended so every activation and sign
condition uses its own lam_k (needed because the two dictionary blocks
carry different penalties). The returned solution always satisfies the
subgradient optimality certificate

    |2 d_k^T (D a - x)| <= lam_k                   for a_k = 0
    2 d_k^T (D a - x) + lam_k sign(a_k) = 0        for a_k != 0

to within `tol` (default 1e-8).
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import _fs_kernel

if TYPE_CHECKING:  # only for annotations; avoids a runtime import cycle
    from .dictionaries import CompositeDictionary
    from .weights import WeightVector

# the compiled kernel and the numpy loop implement the same search; the
# kernel exists because desk-scale pipelines run millions of solves
USE_KERNEL = _fs_kernel.HAVE_NUMBA and not os.environ.get("COMPDICT_NO_NUMBA")

__all__ = [
    "SparseCode",
    "PenaltyProfile",
    "FeatureSignError",
    "feature_sign",
    "feature_sign_gram",
    "code_with_weights",
    "sparse_objective",
]

CERTIFICATE_TOL = 1e-8


@dataclass(frozen=True)
class SparseCode:
    """Coefficient vector split into the global and specific blocks."""

    global_block: np.ndarray
    specific_block: np.ndarray

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.global_block, self.specific_block])

    @classmethod
    def from_full(cls, a: np.ndarray, n_global: int) -> "SparseCode":
        a = np.asarray(a, dtype=np.float64)
        return cls(a[:n_global].copy(), a[n_global:].copy())

    def support_size(self) -> int:
        return int(np.count_nonzero(self.global_block) + np.count_nonzero(self.specific_block))


@dataclass(frozen=True)
class PenaltyProfile:
    """Per-coefficient l1 penalties, one strictly positive value per atom."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(v > 0):
            raise ValueError("penalties must be a 1-D array of strictly positive values")
        object.__setattr__(self, "values", v)

    @classmethod
    def for_blocks(cls, lambda_e: float, lambda_i: float,
                   n_global: int, n_specific: int) -> "PenaltyProfile":
        return cls(np.concatenate([
            np.full(n_global, float(lambda_e)),
            np.full(n_specific, float(lambda_i)),
        ]))


class FeatureSignError(RuntimeError):
    """Raised when the active-set search exhausts its iteration cap.

    Carries the best iterate seen and the worst violation of the
    optimality certificate at that iterate.
    """

    def __init__(self, message: str, best_iterate: np.ndarray, certificate_violation: float):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.certificate_violation = certificate_violation


def sparse_objective(dictionary: np.ndarray, x: np.ndarray, a: np.ndarray,
                     penalties: PenaltyProfile) -> float:
    """The coding objective ||x - D a||^2 + sum_k lam_k |a_k|."""
    r = x - dictionary @ a
    return float(r @ r + np.abs(a) @ penalties.values)


def feature_sign(dictionary: np.ndarray, x: np.ndarray, penalties: PenaltyProfile,
                 tol: float = CERTIFICATE_TOL) -> np.ndarray:
    """Minimize ||x - D a||^2 + sum lam_k |a_k| exactly.

    Parameters
    ----------
    dictionary : (p, K) array; zero columns are legal and never activate
    x : (p,) signal
    penalties : strictly positive per-coefficient penalties, length K
    tol : certificate tolerance

    Returns
    -------
    (K,) coefficient vector satisfying the optimality certificate.

    Raises
    ------
    FeatureSignError
        After 10*K active-set steps without certificate satisfaction.
    """
    dictionary = np.asarray(dictionary, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    p, n_atoms = dictionary.shape
    if x.shape != (p,):
        raise ValueError(f"signal shape {x.shape} does not match dictionary {dictionary.shape}")
    return feature_sign_gram(dictionary.T @ dictionary, dictionary.T @ x, penalties, tol)


def feature_sign_gram(gram: np.ndarray, corr: np.ndarray, penalties: PenaltyProfile,
                      tol: float = CERTIFICATE_TOL,
                      weights: np.ndarray | None = None) -> np.ndarray:
    """Feature-sign search on a precomputed Gram matrix and correlation D^T x.

    Same contract as `feature_sign`; this entry point exists because batch
    callers reuse one Gram matrix across many signals. When `weights` is
    given, the problem solved is the one over the column-scaled dictionary
    D diag(w) -- i.e. gram and corr stay unweighted and the scaling is
    applied lazily, entry by entry, which is what makes per-patch weighted
    coding affordable (atoms with weight zero can never activate).

    The active-set Gram can be rank-deficient once more atoms activate
    than the signal dimension, in which case the solved step direction
    carries no descent guarantee. Every candidate step is therefore
    accepted only if it strictly decreases the objective; otherwise the
    step degrades to an exact single-coordinate update on the worst
    certificate violator, which always descends.
    """
    lam = penalties.values
    n_atoms = corr.shape[0]
    if gram.shape != (n_atoms, n_atoms) or lam.shape != (n_atoms,):
        raise ValueError("gram / corr / penalty shapes are inconsistent")
    step_limit = max(10 * n_atoms, 20)

    if USE_KERNEL:
        gram_c = np.ascontiguousarray(gram, dtype=np.float64)
        corr_c = np.ascontiguousarray(corr, dtype=np.float64)
        if weights is None:
            w_c = np.ones(0)
            use_w = False
        else:
            w_c = np.ascontiguousarray(weights, dtype=np.float64)
            use_w = True
        a, converged, violation = _fs_kernel.search(
            gram_c, corr_c, lam, w_c if use_w else np.zeros(n_atoms),
            use_w, tol, step_limit)
        if not converged:
            raise FeatureSignError(
                f"feature-sign search did not converge within {step_limit} steps "
                f"(best certificate violation {violation:.3e})", a, float(violation))
        return a

    if weights is None:
        w = None
        corr_w = corr
        diag_w = np.diag(gram)
    else:
        w = np.asarray(weights, dtype=np.float64)
        corr_w = w * corr
        diag_w = w * w * np.diag(gram)

    a = np.zeros(n_atoms)
    theta = np.zeros(n_atoms)
    idx = np.zeros(0, dtype=np.intp)

    def eff_matvec(ix: np.ndarray, v: np.ndarray) -> np.ndarray:
        # (D diag(w))^T (D diag(w)) @ a restricted to support ix
        if ix.size == 0:
            return np.zeros(n_atoms)
        if w is None:
            return gram[:, ix] @ v
        return w * (gram[:, ix] @ (w[ix] * v))

    def sub_matrix(ix: np.ndarray) -> np.ndarray:
        sub = gram[np.ix_(ix, ix)]
        if w is not None:
            wi = w[ix]
            sub = sub * np.outer(wi, wi)
        return sub

    def cost(ix: np.ndarray, sub: np.ndarray, v: np.ndarray) -> float:
        # objective minus ||x||^2, restricted to ix (exact for supp(v) in ix)
        return float(v @ sub @ v - 2.0 * corr_w[ix] @ v + lam[ix] @ np.abs(v))

    current = 0.0
    best_a = a.copy()
    best_violation = np.inf

    for _ in range(step_limit):
        g = 2.0 * (eff_matvec(idx, a[idx]) - corr_w)
        inactive = theta == 0
        zero_viol = np.where(inactive, np.abs(g) - lam, -np.inf)
        active_viol = np.where(~inactive, np.abs(g + lam * theta), 0.0)
        worst = max(float(zero_viol.max(initial=-np.inf)), float(active_viol.max(initial=0.0)))
        if worst < best_violation:
            best_violation = worst
            best_a = a.copy()

        if active_viol.max(initial=0.0) <= tol:
            if zero_viol.max(initial=-np.inf) <= tol:
                return a
            # activate the worst zero-coefficient violator; ties -> lowest index
            pivot = int(np.argmax(zero_viol))
            theta[pivot] = -1.0 if g[pivot] > 0 else 1.0
        else:
            pivot = int(np.argmax(active_viol))

        idx = np.flatnonzero(theta)
        sub_gram = sub_matrix(idx)
        rhs = corr_w[idx] - 0.5 * lam[idx] * theta[idx]
        a_new = _solve_stationary(sub_gram, rhs)

        a_old = a[idx]
        candidates = [a_new]
        delta = a_new - a_old
        # sign-flip crossings between the current point and the QP target
        for j in np.flatnonzero(np.sign(a_new) != np.sign(a_old)):
            if delta[j] == 0.0:
                continue
            t = -a_old[j] / delta[j]
            if 0.0 < t <= 1.0:
                c = a_old + t * delta
                c[j] = 0.0
                candidates.append(c)

        costs = [cost(idx, sub_gram, v) for v in candidates]
        k = int(np.argmin(costs))
        if costs[k] < current:
            a[idx] = candidates[k]
            current = costs[k]
        else:
            # degenerate direction: exact minimization over the pivot alone
            gkk = diag_w[pivot]
            c_k = corr_w[pivot] - eff_matvec(idx, a[idx])[pivot] + gkk * a[pivot]
            shrunk = abs(c_k) - 0.5 * lam[pivot]
            a[pivot] = np.sign(c_k) * shrunk / gkk if shrunk > 0 else 0.0
            idx = np.flatnonzero(np.sign(a))
            sub_gram = sub_matrix(idx)
            current = cost(idx, sub_gram, a[idx])
        theta = np.sign(a)
        idx = np.flatnonzero(theta)

    raise FeatureSignError(
        f"feature-sign search did not converge within {step_limit} steps "
        f"(best certificate violation {best_violation:.3e})",
        best_a,
        float(best_violation),
    )


def _solve_stationary(sub_gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the sign-fixed stationarity system.

    A rank-deficient active-set Gram (more active atoms than signal
    dimensions) gets a tiny ridge: the ridged solution is then dominated
    by the Gram's null-space component of `rhs`, which is exactly the
    direction along which the objective descends linearly until a sign
    crossing removes an atom.
    """
    try:
        sol = np.linalg.solve(sub_gram, rhs)
        if np.all(np.isfinite(sol)) and (
            np.linalg.norm(sub_gram @ sol - rhs) <= 1e-8 * (np.linalg.norm(rhs) + 1.0)
        ):
            return sol
    except np.linalg.LinAlgError:
        pass
    eps = 1e-12 * (np.trace(sub_gram) / sub_gram.shape[0] + 1.0)
    return np.linalg.solve(sub_gram + eps * np.eye(sub_gram.shape[0]), rhs)


def code_with_weights(composite: "CompositeDictionary", x: np.ndarray, weights: "WeightVector",
                      penalties: PenaltyProfile) -> SparseCode:
    """Sparse-code `x` over a composite dictionary with per-atom weights.

    The weight w_k folds into the effective dictionary column d_k * w_k,
    so the reconstruction of a returned code is sum_k d_k w_k a_k. Atoms
    whose weight underflowed to zero become zero columns, which the
    feature-sign certificate keeps permanently inactive.
    """
    x = np.asarray(x, dtype=np.float64)
    w = weights.full
    matrix = composite.matrix
    if w.shape[0] != matrix.shape[1]:
        raise ValueError("weight count does not match composite atom count")
    effective = matrix * w[None, :]
    a = feature_sign(effective, x, penalties)
    return SparseCode.from_full(a, composite.n_global)
