"""Weight kernels: ranges, reductions, and the finite-difference gradient gate."""
import numpy as np
import pytest

from compdict.dictionaries import BaseDictionary, CompositeDictionary
from compdict.sparse_coding import SparseCode
from compdict.weights import (
    FixedRBFParams,
    MahalanobisParams,
    WeightVector,
    composite_weights,
    load_mahalanobis,
    mahalanobis_weight,
    mahalanobis_weight_matrix,
    rbf_weight,
    rbf_weight_matrix,
    save_mahalanobis,
    weight_gradient_F,
)

from oracles import fd_gradient_F


def random_composite(rng, p=6, m=5, n=3):
    dg = rng.standard_normal((p, m))
    ds = rng.standard_normal((p, n))
    dg /= np.linalg.norm(dg, axis=0)
    ds /= np.linalg.norm(ds, axis=0)
    return CompositeDictionary(BaseDictionary(dg, "external"), BaseDictionary(ds, "internal"))


def test_rbf_weight_identity_and_closed_form():
    x = np.array([0.3, -0.2, 1.0])
    assert rbf_weight(x, x, 2.5) == 1.0
    # ||d - x||^2 = ln 2, omega = 1 -> exactly 0.5
    d = x.copy()
    d[0] += np.sqrt(np.log(2.0))
    assert abs(rbf_weight(d, x, 1.0) - 0.5) < 1e-12


def test_rbf_weight_omega_doubling_squares():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d, x = rng.standard_normal(5), rng.standard_normal(5)
        omega = float(rng.uniform(0.1, 3.0))
        w = rbf_weight(d, x, omega)
        assert abs(rbf_weight(d, x, 2.0 * omega) - w**2) < 1e-12


def test_rbf_weight_decreasing_in_distance():
    x = np.zeros(4)
    prev = 1.0
    for step in (0.1, 0.5, 1.0, 2.0):
        w = rbf_weight(x + step, x, 0.8)
        assert w < prev
        prev = w


def test_mahalanobis_zero_matrix_gives_one():
    rng = np.random.default_rng(4)
    d, x = rng.standard_normal(6), rng.standard_normal(6)
    assert mahalanobis_weight(d, x, np.zeros((6, 6))) == 1.0


def test_mahalanobis_reduces_to_rbf():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = int(rng.integers(2, 9))
        d, x = rng.standard_normal(p), rng.standard_normal(p)
        omega = float(rng.uniform(0.05, 5.0))
        f = np.sqrt(omega) * np.eye(p)
        assert abs(mahalanobis_weight(d, x, f) - rbf_weight(d, x, omega)) < 1e-12


def test_mahalanobis_matches_quadratic_form():
    rng = np.random.default_rng(6)
    for _ in range(50):
        p = int(rng.integers(2, 8))
        d, x = rng.standard_normal(p), rng.standard_normal(p)
        f = rng.standard_normal((p, p))
        diff = d - x
        direct = np.exp(-float(diff @ (f.T @ f) @ diff))
        assert abs(mahalanobis_weight(d, x, f) - direct) < 1e-12


def test_weight_ranges_and_flush():
    rng = np.random.default_rng(7)
    atoms = rng.standard_normal((4, 30))
    x = rng.standard_normal(4)
    w = rbf_weight_matrix(atoms, x[None, :], 1.3)[0]
    assert np.all(w > 0) and np.all(w <= 1.0)
    # far atom underflows to an exact zero
    far = x + 1e6
    assert rbf_weight(far, x, 1.0) == 0.0
    assert mahalanobis_weight(far, x, np.eye(4)) == 0.0


def test_matrix_forms_match_scalar_forms():
    rng = np.random.default_rng(8)
    atoms = rng.standard_normal((5, 7))
    xs = rng.standard_normal((3, 5))
    f = rng.standard_normal((5, 5))
    wm = mahalanobis_weight_matrix(atoms, xs, f)
    wr = rbf_weight_matrix(atoms, xs, 0.9)
    for i in range(3):
        for k in range(7):
            assert abs(wm[i, k] - mahalanobis_weight(atoms[:, k], xs[i], f)) < 1e-12
            assert abs(wr[i, k] - rbf_weight(atoms[:, k], xs[i], 0.9)) < 1e-12


def test_specific_weights_decay_faster_at_equal_distance():
    # with omega_s > omega_g, equal distances give smaller specific weights
    params = FixedRBFParams(0.5, 2.0)
    x = np.zeros(3)
    d = np.array([1.0, 0.0, 0.0])
    assert rbf_weight(d, x, params.omega_s) < rbf_weight(d, x, params.omega_g)


def test_fixed_rbf_params_constraint():
    with pytest.raises(ValueError):
        FixedRBFParams(2.0, 1.0)
    with pytest.raises(ValueError):
        FixedRBFParams(-1.0, 1.0)


def test_weight_vector_range_validation():
    with pytest.raises(ValueError):
        WeightVector(np.array([0.5, 1.2]), np.array([0.1]))


def test_gradient_zero_cases():
    rng = np.random.default_rng(9)
    comp = random_composite(rng)
    x = rng.standard_normal(comp.p)
    params = MahalanobisParams(rng.standard_normal((comp.p, comp.p)),
                               rng.standard_normal((comp.p, comp.p)))
    zero_code = SparseCode(np.zeros(comp.n_global), np.zeros(comp.n_specific))
    assert np.array_equal(weight_gradient_F(comp, x, zero_code, params, "global"),
                          np.zeros((comp.p, comp.p)))
    # a single active atom equal to x contributes nothing: (d - x) vanishes
    atoms = comp.global_part.atoms.copy()
    atoms[:, 0] = x / np.linalg.norm(x)
    comp2 = CompositeDictionary(BaseDictionary(atoms, "external"), comp.specific_part)
    code = SparseCode(np.zeros(comp.n_global), np.zeros(comp.n_specific))
    code.global_block[0] = 1.7
    grad = weight_gradient_F(comp2, x / np.linalg.norm(x), code, params, "global")
    assert np.allclose(grad, 0.0, atol=1e-14)


def test_gradient_matches_finite_differences():
    # the mandatory pre-build gate for the derived dJ/dF formula; configs
    # whose true gradient is below FD cancellation noise carry no signal
    # and are not counted toward the required 100
    rng = np.random.default_rng(11)
    counted = 0
    worst = 0.0
    while counted < 120:
        p = int(rng.integers(3, 7))
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 5))
        comp = random_composite(rng, p=p, m=m, n=n)
        x = rng.standard_normal(p) * 0.8
        code = SparseCode(rng.standard_normal(m) * rng.integers(0, 2, m),
                          rng.standard_normal(n) * rng.integers(0, 2, n))
        params = MahalanobisParams(0.6 * rng.standard_normal((p, p)),
                                   0.6 * rng.standard_normal((p, p)))
        which = "global" if rng.uniform() < 0.5 else "specific"
        got = weight_gradient_F(comp, x, code, params, which)
        ref = fd_gradient_F(comp.global_part.atoms, comp.specific_part.atoms, x,
                            code.global_block, code.specific_block,
                            params.f_global, params.f_specific, which)
        if np.linalg.norm(ref) <= 1e-5:
            assert np.linalg.norm(got) < 1e-4
            continue
        rel = np.linalg.norm(got - ref) / np.linalg.norm(ref)
        worst = max(worst, rel)
        assert rel < 1e-4, f"relative FD error {rel:.2e}"
        counted += 1
    assert worst < 1e-4


def test_composite_weights_dispatch():
    rng = np.random.default_rng(12)
    comp = random_composite(rng)
    x = rng.standard_normal(comp.p)
    wv = composite_weights(comp, x, FixedRBFParams(0.5, 2.0))
    assert wv.global_weights.shape == (comp.n_global,)
    assert wv.specific_weights.shape == (comp.n_specific,)
    params = MahalanobisParams(np.sqrt(0.5) * np.eye(comp.p), np.sqrt(2.0) * np.eye(comp.p))
    wv2 = composite_weights(comp, x, params)
    assert np.allclose(wv.full, wv2.full, atol=1e-12)


def test_mahalanobis_roundtrip(tmp_path):
    rng = np.random.default_rng(13)
    params = MahalanobisParams(rng.standard_normal((5, 5)), rng.standard_normal((5, 5)))
    path = tmp_path / "metric.bin"
    save_mahalanobis(params, path, provenance={"rng_seed": 13})
    back = load_mahalanobis(path)
    assert np.array_equal(back.f_global, params.f_global)
    assert np.array_equal(back.f_specific, params.f_specific)
    assert (tmp_path / "metric.bin.json").exists()
