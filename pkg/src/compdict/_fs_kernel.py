"""Compiled inner loop of the feature-sign search.

Same algorithm as the pure-numpy path in sparse_coding.feature_sign_gram:
one atom activates per step, the sign-fixed stationarity system is solved
with a tiny ridge, sign-flip crossings form the candidate set, candidates
are accepted only on strict objective decrease, and a single-coordinate
exact update is the guaranteed-descent fallback. Returns a status code
instead of raising so the wrapper owns the error contract.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env toggle
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def search(gram, corr, lam, w, use_w, tol, step_cap):  # pragma: no cover - jitted
    """Returns (a, converged, best_violation)."""
    n = corr.shape[0]
    corr_w = np.empty(n)
    diag_w = np.empty(n)
    for k in range(n):
        if use_w:
            corr_w[k] = w[k] * corr[k]
            diag_w[k] = w[k] * w[k] * gram[k, k]
        else:
            corr_w[k] = corr[k]
            diag_w[k] = gram[k, k]

    a = np.zeros(n)
    theta = np.zeros(n)
    g = np.empty(n)
    idx = np.empty(n, np.int64)
    n_active = 0
    current = 0.0
    best_a = np.zeros(n)
    best_violation = 1e300

    for _step in range(step_cap):
        # g = 2 * (G_eff a - corr_eff), using only the active columns
        for k in range(n):
            g[k] = -corr_w[k]
        for jj in range(n_active):
            j = idx[jj]
            zj = a[j] * (w[j] if use_w else 1.0)
            for k in range(n):
                g[k] += (w[k] if use_w else 1.0) * gram[k, j] * zj
        for k in range(n):
            g[k] *= 2.0

        zero_worst = -1e300
        zero_arg = -1
        act_worst = 0.0
        act_arg = -1
        for k in range(n):
            if theta[k] == 0.0:
                v = abs(g[k]) - lam[k]
                if v > zero_worst:
                    zero_worst = v
                    zero_arg = k
            else:
                v = abs(g[k] + lam[k] * theta[k])
                if v > act_worst:
                    act_worst = v
                    act_arg = k
        worst = zero_worst if zero_worst > act_worst else act_worst
        if worst < best_violation:
            best_violation = worst
            for k in range(n):
                best_a[k] = a[k]

        if act_worst <= tol:
            if zero_worst <= tol:
                return a, True, best_violation
            pivot = zero_arg
            theta[pivot] = -1.0 if g[pivot] > 0.0 else 1.0
        else:
            pivot = act_arg

        n_active = 0
        for k in range(n):
            if theta[k] != 0.0:
                idx[n_active] = k
                n_active += 1
        m = n_active

        sub = np.empty((m, m))
        rhs = np.empty(m)
        trace = 0.0
        for i in range(m):
            ki = idx[i]
            wi = w[ki] if use_w else 1.0
            for j in range(m):
                kj = idx[j]
                wj = w[kj] if use_w else 1.0
                sub[i, j] = wi * wj * gram[ki, kj]
            trace += sub[i, i]
            rhs[i] = corr_w[ki] - 0.5 * lam[ki] * theta[ki]
        eps = 1e-12 * (trace / m + 1.0)
        ridged = sub.copy()
        for i in range(m):
            ridged[i, i] += eps
        a_new = np.linalg.solve(ridged, rhs)

        a_old = np.empty(m)
        for i in range(m):
            a_old[i] = a[idx[i]]

        # candidates: the QP target plus every sign-flip crossing toward it
        cand = np.empty((m + 1, m))
        n_cand = 1
        for i in range(m):
            cand[0, i] = a_new[i]
        for j in range(m):
            sn, so = np.sign(a_new[j]), np.sign(a_old[j])
            dj = a_new[j] - a_old[j]
            if sn != so and dj != 0.0:
                t = -a_old[j] / dj
                if 0.0 < t <= 1.0:
                    for i in range(m):
                        cand[n_cand, i] = a_old[i] + t * (a_new[i] - a_old[i])
                    cand[n_cand, j] = 0.0
                    n_cand += 1

        best_cost = 1e300
        best_c = 0
        for c in range(n_cand):
            quad = 0.0
            lin = 0.0
            for i in range(m):
                vi = cand[c, i]
                lin += corr_w[idx[i]] * vi - 0.5 * lam[idx[i]] * abs(vi)
                row = 0.0
                for j in range(m):
                    row += sub[i, j] * cand[c, j]
                quad += vi * row
            cost_c = quad - 2.0 * lin
            if cost_c < best_cost:
                best_cost = cost_c
                best_c = c

        if best_cost < current:
            for i in range(m):
                a[idx[i]] = cand[best_c, i]
            current = best_cost
        else:
            # exact single-coordinate update on the pivot
            gkk = diag_w[pivot]
            dot = 0.0
            for jj in range(m):
                j = idx[jj]
                zj = a[j] * (w[j] if use_w else 1.0)
                dot += (w[pivot] if use_w else 1.0) * gram[pivot, j] * zj
            c_k = corr_w[pivot] - dot + gkk * a[pivot]
            shrunk = abs(c_k) - 0.5 * lam[pivot]
            if shrunk > 0.0 and gkk > 0.0:
                a[pivot] = np.sign(c_k) * shrunk / gkk
            else:
                a[pivot] = 0.0
            # recompute the restricted objective at the updated point
            n_active = 0
            for k in range(n):
                if a[k] != 0.0:
                    idx[n_active] = k
                    n_active += 1
            quad = 0.0
            lin = 0.0
            for ii in range(n_active):
                ki = idx[ii]
                wi = w[ki] if use_w else 1.0
                vi = a[ki]
                lin += corr_w[ki] * vi - 0.5 * lam[ki] * abs(vi)
                row = 0.0
                for jj in range(n_active):
                    kj = idx[jj]
                    row += wi * (w[kj] if use_w else 1.0) * gram[ki, kj] * a[kj]
                quad += vi * row
            current = quad - 2.0 * lin

        n_active = 0
        for k in range(n):
            theta[k] = np.sign(a[k])
            if theta[k] != 0.0:
                idx[n_active] = k
                n_active += 1

    return best_a, False, best_violation
