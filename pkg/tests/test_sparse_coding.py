"""Feature-sign solver against the sign-enumeration oracle and its certificate."""
import numpy as np
import pytest

from compdict.dictionaries import BaseDictionary, CompositeDictionary
from compdict.sparse_coding import (
    PenaltyProfile,
    SparseCode,
    code_with_weights,
    feature_sign,
    sparse_objective,
)
from compdict.weights import WeightVector

from oracles import l1_brute_force


def random_instance(rng, p=None, n_atoms=None):
    p = p or rng.integers(2, 7)
    n_atoms = n_atoms or rng.integers(2, 11)
    d = rng.standard_normal((p, n_atoms))
    x = rng.standard_normal(p)
    lam = rng.uniform(0.05, 1.5, size=n_atoms)
    return d, x, lam


def certificate_violation(d, x, lam, a, tol=0.0):
    g = 2.0 * d.T @ (d @ a - x)
    viol = 0.0
    for k in range(len(a)):
        if a[k] == 0:
            viol = max(viol, abs(g[k]) - lam[k])
        else:
            viol = max(viol, abs(g[k] + lam[k] * np.sign(a[k])))
    return viol


def test_orthonormal_soft_threshold():
    # D = I2, x = (1, 0), lam = 0.5 -> a = (0.75, 0)
    d = np.eye(2)
    a = feature_sign(d, np.array([1.0, 0.0]), PenaltyProfile(np.array([0.5, 0.5])))
    assert np.allclose(a, [0.75, 0.0], atol=1e-12)


def test_large_penalty_gives_zero():
    rng = np.random.default_rng(7)
    for _ in range(20):
        d, x, _ = random_instance(rng)
        lam = np.full(d.shape[1], 2.0 * np.max(np.abs(d.T @ x)) + 1e-9)
        a = feature_sign(d, x, PenaltyProfile(lam))
        assert np.all(a == 0.0)


def test_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(1234)
    for _ in range(60):
        d, x, lam = random_instance(rng)
        a = feature_sign(d, x, PenaltyProfile(lam))
        obj = sparse_objective(d, x, a, PenaltyProfile(lam))
        ref_obj, _ = l1_brute_force(d, x, lam)
        assert obj <= ref_obj + 1e-9
        assert abs(obj - ref_obj) < 1e-9


def test_certificate_holds_at_solutions():
    rng = np.random.default_rng(99)
    for _ in range(100):
        d, x, lam = random_instance(rng)
        a = feature_sign(d, x, PenaltyProfile(lam))
        assert certificate_violation(d, x, lam, a) <= 1e-8


def test_zero_columns_never_activate():
    rng = np.random.default_rng(5)
    d, x, lam = random_instance(rng, p=4, n_atoms=8)
    d[:, [1, 5]] = 0.0
    a = feature_sign(d, x, PenaltyProfile(lam))
    assert a[1] == 0.0 and a[5] == 0.0
    assert certificate_violation(d, x, lam, a) <= 1e-8


def test_l1_term_monotone_in_uniform_penalty_scale():
    rng = np.random.default_rng(21)
    for _ in range(25):
        d, x, lam = random_instance(rng)
        prev = None
        for scale in (1.0, 1.5, 2.5, 4.0):
            a = feature_sign(d, x, PenaltyProfile(scale * lam))
            l1 = float(np.abs(a) @ lam)
            if prev is not None:
                assert l1 <= prev + 1e-12
            prev = l1


def test_high_penalty_coefficients_stay_zero():
    rng = np.random.default_rng(31)
    for _ in range(25):
        d, x, lam = random_instance(rng)
        norms = np.linalg.norm(d, axis=0)
        blocked = rng.integers(0, d.shape[1])
        lam[blocked] = 2.0 * norms[blocked] * np.linalg.norm(x) + 1e-6
        a = feature_sign(d, x, PenaltyProfile(lam))
        assert a[blocked] == 0.0


def _tiny_composite(rng, p=6, m=4, n=3):
    dg = rng.standard_normal((p, m))
    ds = rng.standard_normal((p, n))
    dg /= np.linalg.norm(dg, axis=0)
    ds /= np.linalg.norm(ds, axis=0)
    return CompositeDictionary(BaseDictionary(dg, "external"), BaseDictionary(ds, "internal"))


def test_unit_weights_reduce_to_plain_feature_sign():
    rng = np.random.default_rng(42)
    comp = _tiny_composite(rng)
    x = rng.standard_normal(comp.p)
    pen = PenaltyProfile.for_blocks(0.1, 1.0, comp.n_global, comp.n_specific)
    wv = WeightVector(np.ones(comp.n_global), np.ones(comp.n_specific))
    code = code_with_weights(comp, x, wv, pen)
    plain = feature_sign(comp.matrix, x, pen)
    assert np.array_equal(code.full, plain)


def test_zero_weight_block_never_used():
    rng = np.random.default_rng(43)
    comp = _tiny_composite(rng)
    x = rng.standard_normal(comp.p)
    pen = PenaltyProfile.for_blocks(0.1, 0.1, comp.n_global, comp.n_specific)
    wv = WeightVector(np.ones(comp.n_global), np.zeros(comp.n_specific))
    code = code_with_weights(comp, x, wv, pen)
    assert np.all(code.specific_block == 0.0)


def test_weighted_code_beats_plain_code_under_same_weights():
    rng = np.random.default_rng(44)
    for _ in range(20):
        comp = _tiny_composite(rng)
        x = rng.standard_normal(comp.p)
        pen = PenaltyProfile.for_blocks(0.2, 0.5, comp.n_global, comp.n_specific)
        wv = WeightVector(rng.uniform(0.2, 1.0, comp.n_global),
                          rng.uniform(0.2, 1.0, comp.n_specific))
        effective = comp.matrix * wv.full[None, :]
        code = code_with_weights(comp, x, wv, pen)
        plain = feature_sign(comp.matrix, x, pen)
        assert (sparse_objective(effective, x, code.full, pen)
                <= sparse_objective(effective, x, plain, pen) + 1e-9)


def test_sparse_code_split_roundtrip():
    a = np.arange(7.0)
    code = SparseCode.from_full(a, 4)
    assert np.array_equal(code.global_block, a[:4])
    assert np.array_equal(code.specific_block, a[4:])
    assert np.array_equal(code.full, a)
    assert code.support_size() == 6


def test_penalties_must_be_positive():
    with pytest.raises(ValueError):
        PenaltyProfile(np.array([0.5, 0.0]))
