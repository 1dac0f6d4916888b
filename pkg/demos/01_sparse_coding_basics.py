"""Feature-sign search and atom weights on a toy composite dictionary.

Walks through the building blocks one level below the pipelines: exact
l1 coding, the certificate it satisfies, fixed RBF weights versus the
learnable Mahalanobis weights, and what the weights do to a code.

Run:  python3 demos/01_sparse_coding_basics.py
"""
import numpy as np

from compdict import (
    BaseDictionary,
    CompositeDictionary,
    FixedRBFParams,
    PenaltyProfile,
    code_with_weights,
    composite_weights,
    feature_sign,
    mahalanobis_weight,
    rbf_weight,
)

rng = np.random.default_rng(7)

# a tiny composite: 6 "external" atoms, 3 "internal" ones, all unit norm
p = 8
dg = rng.standard_normal((p, 6))
ds = rng.standard_normal((p, 3))
dg /= np.linalg.norm(dg, axis=0)
ds /= np.linalg.norm(ds, axis=0)
composite = CompositeDictionary(BaseDictionary(dg, "external"),
                                BaseDictionary(ds, "internal"))

# a signal made of two atoms plus noise
x = 0.9 * dg[:, 2] - 0.6 * ds[:, 1] + 0.05 * rng.standard_normal(p)

print("== plain feature-sign coding")
penalties = PenaltyProfile.for_blocks(0.1, 0.1, 6, 3)
a = feature_sign(composite.matrix, x, penalties)
print("  support:", np.flatnonzero(a), " coefficients:", np.round(a[a != 0], 3))
resid = x - composite.matrix @ a
print(f"  residual norm {np.linalg.norm(resid):.4f}")
# the optimality certificate: |2 d^T r| <= lambda for every inactive atom
certificate = np.abs(2 * composite.matrix.T @ (composite.matrix @ a - x))
print(f"  max inactive certificate value {certificate[a == 0].max():.2e} (<= 0.1)")

print("\n== similarity weights")
q = x / np.linalg.norm(x)         # weights compare atoms to the direction
print("  rbf weight of a matching atom:  ", round(rbf_weight(dg[:, 2], q, 1.0), 4))
print("  rbf weight of an unrelated atom:", round(rbf_weight(dg[:, 0], q, 1.0), 4))
f = np.sqrt(1.0) * np.eye(p)
print("  mahalanobis with F = sqrt(omega) I reproduces the RBF value:",
      round(mahalanobis_weight(dg[:, 2], q, f), 4))

print("\n== weighted coding favors similar atoms")
params = FixedRBFParams(omega_g=0.5, omega_s=2.0)
wv = composite_weights(composite, q, params)
code = code_with_weights(composite, x, wv, penalties)
print("  weights:", np.round(wv.full, 3))
print("  weighted support:", np.flatnonzero(code.full))
recon = composite.matrix @ (wv.full * code.full)
print(f"  weighted residual norm {np.linalg.norm(x - recon):.4f}")
