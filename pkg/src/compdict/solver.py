"""Coordinate descent over sparse codes and the two weight metrics.

One solve handles the whole batch of patches from a single input image:
the code step runs feature-sign per patch under the current weights, and
the two metric factors F_S, F_G (shared across the batch) then each take
one gradient step. The paper-style fixed step can overshoot, so every
gradient step is wrapped in halving backtracking: the first candidate in
{beta, beta/2, ..., beta/2^8} that does not increase the batch objective
is accepted, otherwise the update is skipped. That makes the objective
trace monotone by construction rather than by hope.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dictionaries import CompositeDictionary
from .sparse_coding import FeatureSignError, PenaltyProfile, SparseCode, feature_sign_gram
from .weights import (
    FixedRBFParams,
    MahalanobisParams,
    mahalanobis_weight_matrix,
    rbf_weight_matrix,
)

__all__ = [
    "SolverConfig",
    "SolverState",
    "batch_code",
    "batch_weights",
    "objective",
    "warm_start",
    "coordinate_descent",
]

BACKTRACK_HALVINGS = 8


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the composite solve.

    lambda_i defaults to 10 * lambda_e. omega_g / omega_s parameterize the
    fixed RBF weights used to warm-start the learnable metrics, which are
    initialized to sqrt(omega) * (I + init_jitter * diag(u)) with u drawn
    uniformly from [-1, 1] under rng_seed.
    """

    lambda_e: float
    lambda_i: float | None = None
    iterations: int = 5
    beta: float = 0.9
    omega_g: float = 1.0
    omega_s: float = 4.0
    init_jitter: float = 0.01
    rng_seed: int = 0
    early_stop_rel: float = 1e-6

    def __post_init__(self):
        if self.lambda_e <= 0:
            raise ValueError("lambda_e must be positive")
        if self.lambda_i is None:
            object.__setattr__(self, "lambda_i", 10.0 * self.lambda_e)
        if self.lambda_i <= 0:
            raise ValueError("lambda_i must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0 (0 disables the gradient steps)")

    def penalties(self, n_global: int, n_specific: int) -> PenaltyProfile:
        return PenaltyProfile.for_blocks(self.lambda_e, self.lambda_i, n_global, n_specific)


@dataclass
class SolverState:
    """Codes, learned metric factors, and the objective bookkeeping."""

    codes: np.ndarray                  # (n_patches, M+N)
    params: MahalanobisParams
    objective_trace: list[float]
    n_global: int
    iteration_log: list[dict] = field(default_factory=list)

    def sparse_codes(self) -> list[SparseCode]:
        return [SparseCode.from_full(row, self.n_global) for row in self.codes]

    def write_trace_csv(self, path: str | os.PathLike) -> None:
        """Per-iteration trace: objective split and accepted step sizes."""
        fields = ["iteration", "objective", "residual_term", "penalty_term",
                  "step_specific", "step_global"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in self.iteration_log:
                writer.writerow({k: row[k] for k in fields})


def _directions(batch: np.ndarray) -> np.ndarray:
    """Unit-normalized rows; near-zero patches keep a zero query vector.

    Weights are evaluated against the patch direction rather than the raw
    patch: with unit-norm atoms, raw differences are dominated by the
    patch energy (||d - x||^2 ~ 1 + ||x||^2), which would uniformly crush
    the weights of every high-energy patch regardless of which atoms fit.
    """
    norms = np.linalg.norm(batch, axis=1, keepdims=True)
    return np.where(norms < 1e-12, 0.0, batch / np.maximum(norms, 1e-12))


class _SharedProblem:
    """Batch coding problem where every patch shares one composite."""

    def __init__(self, batch: np.ndarray, composite: CompositeDictionary):
        self.x = batch                          # (B, p)
        self.q = _directions(batch)             # weight queries
        self.composite = composite
        self.matrix = composite.matrix
        self.n_global = composite.n_global
        self.n_atoms = self.matrix.shape[1]
        self.gram = self.matrix.T @ self.matrix
        self.corr = batch @ self.matrix         # (B, K)

    def weight_matrix(self, params: FixedRBFParams | MahalanobisParams) -> np.ndarray:
        dg = self.composite.global_part.atoms
        ds = self.composite.specific_part.atoms
        if isinstance(params, FixedRBFParams):
            wg = rbf_weight_matrix(dg, self.q, params.omega_g)
            ws = rbf_weight_matrix(ds, self.q, params.omega_s)
        else:
            wg = mahalanobis_weight_matrix(dg, self.q, params.f_global)
            ws = mahalanobis_weight_matrix(ds, self.q, params.f_specific)
        return np.hstack([wg, ws])

    def block_weight_matrix(self, f_matrix: np.ndarray, which: str) -> np.ndarray:
        atoms = (self.composite.global_part if which == "global" else self.composite.specific_part).atoms
        return mahalanobis_weight_matrix(atoms, self.q, f_matrix)

    def code(self, w: np.ndarray, penalties: PenaltyProfile) -> np.ndarray:
        codes = np.zeros_like(w)
        for i in range(self.x.shape[0]):
            codes[i] = feature_sign_gram(self.gram, self.corr[i], penalties,
                                         weights=w[i])
        return codes

    def reconstruct(self, codes: np.ndarray, w: np.ndarray) -> np.ndarray:
        return (w * codes) @ self.matrix.T

    def objective_terms(self, codes: np.ndarray, w: np.ndarray,
                        penalties: PenaltyProfile) -> tuple[float, float]:
        resid = self.x - self.reconstruct(codes, w)
        return float(np.sum(resid**2)), float(np.sum(np.abs(codes) @ penalties.values))

    def gradient(self, codes: np.ndarray, w: np.ndarray, params: MahalanobisParams,
                 which: str) -> np.ndarray:
        """Batch-mean gradient of the residual term in the selected F.

        The mean (not sum) keeps the step size on the per-signal scale at
        which the fixed step is meaningful, independent of batch size.
        """
        resid = self.x - self.reconstruct(codes, w)     # (B, p)
        if which == "global":
            atoms, f = self.composite.global_part.atoms, params.f_global
            sl = slice(0, self.n_global)
        else:
            atoms, f = self.composite.specific_part.atoms, params.f_specific
            sl = slice(self.n_global, None)
        if atoms.shape[1] == 0:
            return np.zeros_like(f)
        # s_ik = 4 a_ik w_ik (r_i . d_k); grad = F * sum_ik s_ik (d_k - q_i)(d_k - q_i)^T
        s = 4.0 * codes[:, sl] * w[:, sl] * (resid @ atoms)
        col = s.sum(axis=0)
        row = s.sum(axis=1)
        t = (atoms * col) @ atoms.T
        cross = atoms @ s.T @ self.q
        t -= cross + cross.T
        t += (self.q * row[:, None]).T @ self.q
        return f @ t / self.x.shape[0]


class _PerPatchProblem:
    """Batch coding problem with one composite per patch (KNN specific bases).

    The global part must be shared; the specific parts may differ per
    patch but share the atom count, so codes still stack rectangularly.
    """

    def __init__(self, batch: np.ndarray, composites: Sequence[CompositeDictionary]):
        if len(composites) != batch.shape[0]:
            raise ValueError("need exactly one composite per patch")
        first = composites[0]
        for c in composites:
            if c.n_global != first.n_global or c.n_specific != first.n_specific:
                raise ValueError("per-patch composites must share block sizes")
        self.x = batch
        self.q = _directions(batch)
        self.composites = list(composites)
        self.n_global = first.n_global
        self.n_atoms = first.n_global + first.n_specific
        dg = first.global_part.atoms
        self.global_atoms = dg
        self.gram_gg = dg.T @ dg
        self.corr_g = batch @ dg
        # (B, p, N) stack of the per-patch specific atoms
        self.spec = np.stack([c.specific_part.atoms for c in composites])

    def weight_matrix(self, params: FixedRBFParams | MahalanobisParams) -> np.ndarray:
        if isinstance(params, FixedRBFParams):
            wg = rbf_weight_matrix(self.global_atoms, self.q, params.omega_g)
            diffs = self.spec - self.q[:, :, None]
            ws = _flush(np.exp(-np.minimum(params.omega_s * np.sum(diffs**2, axis=1), 700.0)))
        else:
            wg = mahalanobis_weight_matrix(self.global_atoms, self.q, params.f_global)
            diffs = np.einsum("qp,bpn->bqn", params.f_specific, self.spec - self.q[:, :, None])
            ws = _flush(np.exp(-np.minimum(np.sum(diffs**2, axis=1), 700.0)))
        return np.hstack([wg, ws])

    def block_weight_matrix(self, f_matrix: np.ndarray, which: str) -> np.ndarray:
        if which == "global":
            return mahalanobis_weight_matrix(self.global_atoms, self.q, f_matrix)
        diffs = np.einsum("qp,bpn->bqn", f_matrix, self.spec - self.q[:, :, None])
        return _flush(np.exp(-np.minimum(np.sum(diffs**2, axis=1), 700.0)))

    def code(self, w: np.ndarray, penalties: PenaltyProfile) -> np.ndarray:
        m = self.n_global
        codes = np.zeros_like(w)
        for i in range(self.x.shape[0]):
            ds = self.spec[i]
            gram = np.block([
                [self.gram_gg, self.global_atoms.T @ ds],
                [ds.T @ self.global_atoms, ds.T @ ds],
            ])
            corr = np.concatenate([self.corr_g[i], ds.T @ self.x[i]])
            codes[i] = feature_sign_gram(gram, corr, penalties, weights=w[i])
        return codes

    def reconstruct(self, codes: np.ndarray, w: np.ndarray) -> np.ndarray:
        m = self.n_global
        wg_a = (w[:, :m] * codes[:, :m]) @ self.global_atoms.T
        ws_a = np.einsum("bpn,bn->bp", self.spec, w[:, m:] * codes[:, m:])
        return wg_a + ws_a

    def objective_terms(self, codes: np.ndarray, w: np.ndarray,
                        penalties: PenaltyProfile) -> tuple[float, float]:
        resid = self.x - self.reconstruct(codes, w)
        return float(np.sum(resid**2)), float(np.sum(np.abs(codes) @ penalties.values))

    def gradient(self, codes: np.ndarray, w: np.ndarray, params: MahalanobisParams,
                 which: str) -> np.ndarray:
        """Batch-mean gradient; see the shared-problem variant."""
        resid = self.x - self.reconstruct(codes, w)
        m = self.n_global
        if which == "global":
            atoms, f = self.global_atoms, params.f_global
            s = 4.0 * codes[:, :m] * w[:, :m] * (resid @ atoms)
            col = s.sum(axis=0)
            row = s.sum(axis=1)
            t = (atoms * col) @ atoms.T
            cross = atoms @ s.T @ self.q
            t -= cross + cross.T
            t += (self.q * row[:, None]).T @ self.q
            return f @ t / self.x.shape[0]
        f = params.f_specific
        s = 4.0 * codes[:, m:] * w[:, m:] * np.einsum("bp,bpn->bn", resid, self.spec)
        u = self.spec - self.q[:, :, None]           # (B, p, N)
        t = np.einsum("bpn,bn,bqn->pq", u, s, u)
        return f @ t / self.x.shape[0]


def _flush(w: np.ndarray) -> np.ndarray:
    return np.where(w < 1e-300, 0.0, w)


def _make_problem(batch: np.ndarray,
                  composite: CompositeDictionary | Sequence[CompositeDictionary]):
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if isinstance(composite, CompositeDictionary):
        return batch, _SharedProblem(batch, composite)
    return batch, _PerPatchProblem(batch, composite)


def batch_code(batch: np.ndarray, composite: CompositeDictionary | Sequence[CompositeDictionary],
               params: FixedRBFParams | MahalanobisParams | None,
               penalties: PenaltyProfile) -> np.ndarray:
    """Sparse-code a batch of patches; `params` of None means unit weights.

    Returns the (n_patches, M+N) coefficient matrix. This is the plain-SC
    entry point (params=None) and the fixed-weight entry point
    (params=FixedRBFParams) used by the restoration baselines.
    """
    batch, problem = _make_problem(batch, composite)
    if params is None:
        w = np.ones((batch.shape[0], problem.n_atoms))
    else:
        w = problem.weight_matrix(params)
    return problem.code(w, penalties)


def batch_weights(batch: np.ndarray, composite: CompositeDictionary | Sequence[CompositeDictionary],
                  params: FixedRBFParams | MahalanobisParams) -> np.ndarray:
    """Per-atom weights for every patch in a batch, as one (B, M+N) matrix."""
    _, problem = _make_problem(batch, composite)
    return problem.weight_matrix(params)


def objective(batch: np.ndarray, composite: CompositeDictionary | Sequence[CompositeDictionary],
              params: FixedRBFParams | MahalanobisParams | None, codes: np.ndarray,
              config: SolverConfig) -> float:
    """The full batch objective: weighted residual plus per-block l1 terms."""
    batch, problem = _make_problem(batch, composite)
    codes = np.atleast_2d(np.asarray(codes, dtype=np.float64))
    if params is None:
        w = np.ones_like(codes)
    else:
        w = problem.weight_matrix(params)
    penalties = config.penalties(problem.n_global, codes.shape[1] - problem.n_global)
    resid_term, penalty_term = problem.objective_terms(codes, w, penalties)
    return resid_term + penalty_term


def warm_start(batch: np.ndarray, composite: CompositeDictionary | Sequence[CompositeDictionary],
               config: SolverConfig) -> SolverState:
    """Fixed-RBF codes plus jittered metric factors, as solve initialization.

    The metric factors start at sqrt(omega) * (I + jitter * diag(u)), so at
    zero jitter the initial Mahalanobis weights reproduce the RBF weights
    exactly and the recorded starting objective matches the fixed-weight
    solve.
    """
    rbf = FixedRBFParams(config.omega_g, config.omega_s)   # validates omega_s > omega_g
    batch, problem = _make_problem(batch, composite)
    penalties = config.penalties(problem.n_global,
                                 problem.weight_matrix(rbf).shape[1] - problem.n_global)

    w_rbf = problem.weight_matrix(rbf)
    codes = problem.code(w_rbf, penalties)

    p = batch.shape[1]
    rng = np.random.default_rng(config.rng_seed)
    jitter_g = config.init_jitter * rng.uniform(-1.0, 1.0, size=p)
    jitter_s = config.init_jitter * rng.uniform(-1.0, 1.0, size=p)
    f_g = np.sqrt(config.omega_g) * (np.eye(p) + np.diag(jitter_g))
    f_s = np.sqrt(config.omega_s) * (np.eye(p) + np.diag(jitter_s))
    params = MahalanobisParams(f_g, f_s)

    w0 = problem.weight_matrix(params)
    resid_term, penalty_term = problem.objective_terms(codes, w0, penalties)
    state = SolverState(codes, params, [resid_term + penalty_term], problem.n_global)
    state.iteration_log.append({
        "iteration": 0, "objective": resid_term + penalty_term,
        "residual_term": resid_term, "penalty_term": penalty_term,
        "step_specific": float("nan"), "step_global": float("nan"),
    })
    return state


def coordinate_descent(batch: np.ndarray,
                       composite: CompositeDictionary | Sequence[CompositeDictionary],
                       config: SolverConfig,
                       trace_csv: str | os.PathLike | None = None) -> SolverState:
    """Alternate code solves with backtracked gradient steps on F_S, F_G.

    Every outer iteration performs, in order: a feature-sign code step
    under the current weights, one gradient step on F_S, one on F_G.
    The trace records the batch objective after each completed iteration
    (entry 0 is the warm start) and is monotone non-increasing. Iterations
    stop early once the relative decrease falls below
    `config.early_stop_rel`.
    """
    batch, problem = _make_problem(batch, composite)
    state = warm_start(batch, composite, config)
    codes = state.codes
    f = {"global": state.params.f_global, "specific": state.params.f_specific}
    penalties = config.penalties(problem.n_global, codes.shape[1] - problem.n_global)

    current = state.objective_trace[0]
    for it in range(1, config.iterations + 1):
        params = MahalanobisParams(f["global"], f["specific"])
        w = problem.weight_matrix(params)
        try:
            codes = problem.code(w, penalties)
        except FeatureSignError as err:
            raise FeatureSignError(f"outer iteration {it}: {err}", err.best_iterate,
                                   err.certificate_violation) from err
        resid_term, penalty_term = problem.objective_terms(codes, w, penalties)
        current = resid_term + penalty_term

        accepted = {"specific": 0.0, "global": 0.0}
        for which in ("specific", "global"):
            if config.beta == 0.0:
                continue
            params = MahalanobisParams(f["global"], f["specific"])
            grad = problem.gradient(codes, w, params, which)
            other = w[:, : problem.n_global] if which == "specific" else w[:, problem.n_global:]
            step = config.beta
            for _ in range(BACKTRACK_HALVINGS + 1):
                cand_f = f[which] - step * grad
                w_block = problem.block_weight_matrix(cand_f, which)
                w_cand = (np.hstack([other, w_block]) if which == "specific"
                          else np.hstack([w_block, other]))
                r_t, p_t = problem.objective_terms(codes, w_cand, penalties)
                if r_t + p_t <= current:
                    f[which] = cand_f
                    w = w_cand
                    resid_term, penalty_term = r_t, p_t
                    current = r_t + p_t
                    accepted[which] = step
                    break
                step *= 0.5

        state.objective_trace.append(current)
        state.iteration_log.append({
            "iteration": it, "objective": current,
            "residual_term": resid_term, "penalty_term": penalty_term,
            "step_specific": accepted["specific"], "step_global": accepted["global"],
        })
        prev = state.objective_trace[-2]
        if prev - current < config.early_stop_rel * max(abs(prev), 1e-30):
            break

    state.codes = codes
    state.params = MahalanobisParams(f["global"], f["specific"])
    if trace_csv is not None:
        state.write_trace_csv(trace_csv)
    return state
