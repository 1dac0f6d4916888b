"""Base dictionaries learned from external and internal example pools.

A base dictionary is an ordered set of unit-norm atoms stored as the
columns of a (p, count) matrix, tagged with the origin of its training
examples ("external" corpus patches or "internal" patches of the input
image). A composite dictionary pairs one of each; a coupled pair ties
high- and low-resolution dictionaries atom-for-atom for super-resolution.
"""
from __future__ import annotations

import json
import os
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import orthogonal_mp_gram

__all__ = [
    "BaseDictionary",
    "CompositeDictionary",
    "CoupledDictionaryPair",
    "ExamplePool",
    "PairedExamplePool",
    "ksvd_learn",
    "knn_global_base",
    "knn_specific_base",
    "coupled_learn",
    "save_dictionary",
    "load_dictionary",
]

UNIT_NORM_TOL = 1e-10
_ORIGINS = ("external", "internal")


@dataclass(frozen=True)
class BaseDictionary:
    """Ordered unit-norm atoms as columns of a (p, count) matrix.

    `count` may be zero only so that the r-sweep's pure-internal
    (r = 0) composite configuration is expressible.
    """

    atoms: np.ndarray
    origin: str

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        if atoms.ndim != 2:
            raise ValueError("atoms must be a (p, count) matrix")
        if self.origin not in _ORIGINS:
            raise ValueError(f"origin must be one of {_ORIGINS}")
        if atoms.shape[1] > 0:
            norms = np.linalg.norm(atoms, axis=0)
            if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
                raise ValueError("every atom must have unit l2 norm (tol 1e-10)")
        object.__setattr__(self, "atoms", atoms)

    @property
    def p(self) -> int:
        return self.atoms.shape[0]

    @property
    def count(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class CompositeDictionary:
    """A global (external) part and a sample-specific (internal) part."""

    global_part: BaseDictionary
    specific_part: BaseDictionary

    def __post_init__(self):
        if self.global_part.p != self.specific_part.p:
            raise ValueError("both parts must share the atom dimension")

    @property
    def p(self) -> int:
        return self.global_part.p

    @property
    def n_global(self) -> int:
        return self.global_part.count

    @property
    def n_specific(self) -> int:
        return self.specific_part.count

    @property
    def matrix(self) -> np.ndarray:
        """All atoms as one (p, M+N) matrix, global block first."""
        return np.hstack([self.global_part.atoms, self.specific_part.atoms])


@dataclass(frozen=True)
class CoupledDictionaryPair:
    """High/low-resolution dictionaries with aligned atom indices."""

    high: BaseDictionary
    low: BaseDictionary

    def __post_init__(self):
        if self.high.count != self.low.count:
            raise ValueError("coupled dictionaries must have equal atom counts")


@dataclass(frozen=True)
class ExamplePool:
    """Training examples as rows of an (n, p) matrix."""

    examples: np.ndarray
    origin: str

    def __post_init__(self):
        ex = np.asarray(self.examples, dtype=np.float64)
        if ex.ndim != 2 or ex.shape[0] == 0:
            raise ValueError("example pool must be a nonempty (n, p) matrix")
        if self.origin not in _ORIGINS:
            raise ValueError(f"origin must be one of {_ORIGINS}")
        object.__setattr__(self, "examples", ex)

    def __len__(self) -> int:
        return self.examples.shape[0]


@dataclass(frozen=True)
class PairedExamplePool:
    """Aligned (HR, LR) example vectors for coupled learning."""

    high: np.ndarray
    low: np.ndarray
    origin: str = "external"

    def __post_init__(self):
        hi = np.asarray(self.high, dtype=np.float64)
        lo = np.asarray(self.low, dtype=np.float64)
        if hi.ndim != 2 or lo.ndim != 2 or hi.shape[0] != lo.shape[0] or hi.shape[0] == 0:
            raise ValueError("paired pool needs matching nonempty (n, p_h), (n, p_l) matrices")
        if self.origin not in _ORIGINS:
            raise ValueError(f"origin must be one of {_ORIGINS}")
        object.__setattr__(self, "high", hi)
        object.__setattr__(self, "low", lo)

    def __len__(self) -> int:
        return self.high.shape[0]


def _normalize_columns(mat: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Unit-normalize columns; degenerate columns become random unit vectors."""
    mat = np.array(mat, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=0)
    bad = norms < 1e-12
    if np.any(bad):
        if rng is None:
            rng = np.random.default_rng(0)
        repl = rng.standard_normal((mat.shape[0], int(bad.sum())))
        mat[:, bad] = repl
        norms = np.linalg.norm(mat, axis=0)
    return mat / norms


def _omp_codes(atoms: np.ndarray, signals: np.ndarray, sparsity: int) -> np.ndarray:
    """Batch OMP codes, (count, n), at a fixed target sparsity."""
    gram = atoms.T @ atoms
    cov = atoms.T @ signals
    k = min(sparsity, atoms.shape[1], atoms.shape[0])
    with warnings.catch_warnings():
        # premature stop on linearly dependent atoms is fine: the shorter
        # support is still a valid (sparser) code
        warnings.filterwarnings("ignore", message="Orthogonal matching pursuit ended prematurely")
        codes = orthogonal_mp_gram(gram, cov, n_nonzero_coefs=k)
    # sklearn squeezes degenerate axes; restore the (count, n) layout
    return np.asarray(codes, dtype=np.float64).reshape(atoms.shape[1], signals.shape[1])


def ksvd_learn(pool: ExamplePool, atom_count: int, target_sparsity: int = 3,
               iterations: int = 20, rng_seed: int = 0,
               mse_trace: list | None = None) -> BaseDictionary:
    """Learn a dictionary by K-SVD: alternate OMP coding and rank-1 atom updates.

    The dictionary is initialized from a random sample of training
    examples. Each iteration codes the pool with OMP at `target_sparsity`,
    keeps the previous code for any signal the fresh OMP fits worse (which
    makes the training error non-increasing), then updates every atom and
    its coefficients by a rank-1 SVD of the restricted residual. Atoms
    unused by the coding stage are replaced with the currently
    worst-represented training example; so are near-duplicate atoms
    (coherence above 0.99), without which one-sparse pools stall with two
    atoms splitting a single cluster. An iteration whose duplicate
    replacement would regress the training error is redone without it, so
    the error trace stays non-increasing unconditionally.

    Parameters
    ----------
    pool : training examples, at least `atom_count` of them
    atom_count : number of atoms to learn
    target_sparsity : nonzeros per signal in the coding stage
    iterations : full K-SVD sweeps; 0 returns the seeded initialization
    rng_seed : seeds initialization and degenerate-atom replacement
    mse_trace : optional list; receives the mean squared representation
        error of the pool after each completed iteration
    """
    if atom_count < 1:
        raise ValueError("atom_count must be >= 1")
    if target_sparsity < 1:
        raise ValueError("target_sparsity must be >= 1")
    signals = pool.examples.T  # (p, n)
    p, n = signals.shape
    if n < atom_count:
        raise ValueError(f"pool of {n} examples cannot seed {atom_count} atoms")

    rng = np.random.default_rng(rng_seed)
    picks = rng.choice(n, size=atom_count, replace=False)
    atoms = _normalize_columns(signals[:, picks], rng)

    codes = np.zeros((atom_count, n))
    prev_mse = np.inf
    for _ in range(iterations):
        for try_dedup in (True, False):
            cand_atoms, cand_codes = atoms.copy(), codes.copy()
            if try_dedup:
                _replace_duplicate_atoms(cand_atoms, cand_codes, signals, rng)
            mse = _ksvd_sweep(cand_atoms, cand_codes, signals, target_sparsity, rng)
            if mse <= prev_mse:
                break
        atoms, codes = cand_atoms, cand_codes
        prev_mse = mse
        if mse_trace is not None:
            mse_trace.append(float(mse))

    return BaseDictionary(_normalize_columns(atoms, rng), pool.origin)


def _ksvd_sweep(atoms: np.ndarray, codes: np.ndarray, signals: np.ndarray,
                target_sparsity: int, rng: np.random.Generator) -> float:
    """One coding pass plus one atom-update pass, in place; returns the MSE."""
    atom_count = atoms.shape[1]
    fresh = _omp_codes(atoms, signals, target_sparsity)
    # keep whichever code represents each signal better
    err_fresh = np.sum((signals - atoms @ fresh) ** 2, axis=0)
    err_old = np.sum((signals - atoms @ codes) ** 2, axis=0)
    worse = err_fresh > err_old
    fresh[:, worse] = codes[:, worse]
    codes[:] = fresh

    residual = signals - atoms @ codes
    replaced: set[int] = set()
    for k in range(atom_count):
        used = np.flatnonzero(codes[k])
        if used.size == 0:
            col_err = np.sum(residual**2, axis=0)
            col_err[list(replaced)] = -np.inf
            j = int(np.argmax(col_err))
            replaced.add(j)
            atoms[:, k] = _normalize_columns(signals[:, j : j + 1], rng)[:, 0]
            continue
        # restricted residual with atom k's contribution added back
        sub = residual[:, used] + np.outer(atoms[:, k], codes[k, used])
        u, s, vt = np.linalg.svd(sub, full_matrices=False)
        atoms[:, k] = u[:, 0]
        new_coefs = s[0] * vt[0]
        residual[:, used] = sub - np.outer(atoms[:, k], new_coefs)
        codes[k, used] = new_coefs
    return float(np.mean(np.sum((signals - atoms @ codes) ** 2, axis=0)))


def _replace_duplicate_atoms(atoms: np.ndarray, codes: np.ndarray, signals: np.ndarray,
                             rng: np.random.Generator, coherence: float = 0.99) -> None:
    """Re-seed the higher-indexed atom of any near-parallel pair, in place."""
    gram = np.abs(atoms.T @ atoms)
    np.fill_diagonal(gram, 0.0)
    dupes = [k for k in range(atoms.shape[1]) if gram[:k, k].max(initial=0.0) > coherence]
    if not dupes:
        return
    col_err = np.sum((signals - atoms @ codes) ** 2, axis=0)
    taken: set[int] = set()
    for k in dupes:
        err = col_err.copy()
        err[list(taken)] = -np.inf
        j = int(np.argmax(err))
        taken.add(j)
        atoms[:, k] = _normalize_columns(signals[:, j : j + 1], rng)[:, 0]
        codes[k, :] = 0.0


def knn_global_base(pool: ExamplePool, n_centroids: int, rng_seed: int = 0,
                    max_iter: int = 100) -> BaseDictionary:
    """Cluster the pool with Lloyd iterations and emit normalized centroids.

    Seeding is greedy farthest-point: the first centroid is a random
    example, each next one the example farthest from all chosen so far
    (random init alone strands well-separated clusters in local minima).
    A cluster that empties during iteration is re-seeded from the example
    currently farthest from its assigned centroid.
    """
    X = pool.examples  # (n, p)
    n = X.shape[0]
    if n < n_centroids:
        raise ValueError(f"pool of {n} examples cannot seed {n_centroids} centroids")
    rng = np.random.default_rng(rng_seed)
    seeds = [int(rng.integers(n))]
    nearest = np.sum((X - X[seeds[0]]) ** 2, axis=1)
    for _ in range(1, n_centroids):
        k = int(np.argmax(nearest))
        seeds.append(k)
        nearest = np.minimum(nearest, np.sum((X - X[k]) ** 2, axis=1))
    centroids = X[seeds].copy()

    assign = np.full(n, -1)
    for _ in range(max_iter):
        d2 = _sq_distances(X, centroids)
        new_assign = np.argmin(d2, axis=1)
        taken = d2[np.arange(n), new_assign]
        for k in range(n_centroids):
            if not np.any(new_assign == k):
                far = int(np.argmax(taken))
                new_assign[far] = k
                taken[far] = -np.inf
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for k in range(n_centroids):
            centroids[k] = X[assign == k].mean(axis=0)

    return BaseDictionary(_normalize_columns(centroids.T, rng), pool.origin)


def _sq_distances(X: np.ndarray, C: np.ndarray, chunk: int = 16384) -> np.ndarray:
    """Squared euclidean distances between rows of X and rows of C."""
    out = np.empty((X.shape[0], C.shape[0]))
    c2 = np.sum(C**2, axis=1)
    for lo in range(0, X.shape[0], chunk):
        hi = min(lo + chunk, X.shape[0])
        blk = X[lo:hi]
        out[lo:hi] = np.sum(blk**2, axis=1)[:, None] + c2[None, :] - 2.0 * blk @ C.T
    np.maximum(out, 0.0, out=out)
    return out


def knn_specific_base(candidates: np.ndarray, query: np.ndarray, n_atoms: int) -> BaseDictionary:
    """The `n_atoms` candidates nearest to `query`, normalized as atoms.

    Candidates whose norm is below 1e-12 cannot be unit atoms and are
    skipped. Output is ordered by increasing distance, ties broken by the
    candidate scan order.
    """
    candidates = np.asarray(candidates, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    usable = np.flatnonzero(np.linalg.norm(candidates, axis=1) >= 1e-12)
    if usable.size < n_atoms:
        raise ValueError(f"only {usable.size} usable candidates for {n_atoms} atoms")
    diffs = candidates[usable] - query[None, :]
    d2 = np.sum(diffs**2, axis=1)
    order = np.argsort(d2, kind="stable")[:n_atoms]
    chosen = candidates[usable[order]].T
    return BaseDictionary(_normalize_columns(chosen), "internal")


def coupled_learn(pairs: PairedExamplePool, atom_count: int, target_sparsity: int = 3,
                  iterations: int = 20, rng_seed: int = 0) -> CoupledDictionaryPair:
    """Learn an aligned (high, low) dictionary pair by joint K-SVD.

    Each training pair is stacked into one vector with per-space
    1/sqrt(p) balancing so neither resolution dominates the fit; the
    jointly learned atoms are then split back and re-normalized per
    space, keeping index alignment.
    """
    ph = pairs.high.shape[1]
    pl = pairs.low.shape[1]
    joint = np.hstack([pairs.high / np.sqrt(ph), pairs.low / np.sqrt(pl)])
    joint_pool = ExamplePool(joint, pairs.origin)
    joint_dict = ksvd_learn(joint_pool, atom_count, target_sparsity, iterations, rng_seed)
    rng = np.random.default_rng(rng_seed)
    high = _normalize_columns(joint_dict.atoms[:ph], rng)
    low = _normalize_columns(joint_dict.atoms[ph:], rng)
    return CoupledDictionaryPair(
        BaseDictionary(high, pairs.origin), BaseDictionary(low, pairs.origin)
    )


# --- serialization --------------------------------------------------------
#
# Flat binary layout: magic b"CDB1", then little-endian uint32 p, uint32
# count, uint8 origin (0 = external, 1 = internal), then count*p float64
# values, one atom after another (atom-major, row-major within the file).
# A JSON sidecar at <path>.json carries free-form provenance.

_MAGIC = b"CDB1"


def save_dictionary(dictionary: BaseDictionary, path: str | os.PathLike,
                    provenance: dict | None = None) -> None:
    """Write a dictionary to the documented flat binary layout."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIB", dictionary.p, dictionary.count, _ORIGINS.index(dictionary.origin)))
        fh.write(np.ascontiguousarray(dictionary.atoms.T).tobytes())
    if provenance is not None:
        with open(os.fspath(path) + ".json", "w") as fh:
            json.dump(provenance, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_dictionary(path: str | os.PathLike) -> BaseDictionary:
    """Read a dictionary written by `save_dictionary`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a dictionary file (bad magic {magic!r})")
        p, count, origin_tag = struct.unpack("<IIB", fh.read(9))
        body = np.frombuffer(fh.read(8 * p * count), dtype="<f8").reshape(count, p)
    return BaseDictionary(body.T.copy(), _ORIGINS[origin_tag])
