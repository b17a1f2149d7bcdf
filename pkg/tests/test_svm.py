import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leafrec.errors import ConvergenceError, DegenerateError
from leafrec.svm import (GridSearchSpec, Standardizer, grid_search, kkt_violation, load_svm,
                         rbf_gram, rbf_kernel, save_svm, train_binary, train_multiclass)
from qp_oracle import solve_dual


def test_rbf_closed_forms():
    assert rbf_kernel([1, 2, 3], [1, 2, 3], 0.7) == 1.0
    assert rbf_kernel([0, 0], [1, 0], 1.0) == pytest.approx(math.exp(-1))
    with pytest.raises(ValueError):
        rbf_kernel([1, 2], [1, 2, 3], 1.0)


@settings(max_examples=50)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(1e-3, 2))
def test_rbf_symmetric(x, y, g):
    assert abs(rbf_kernel(x, y, g) - rbf_kernel(y, x, g)) <= 1e-15


def test_two_point_boundary():
    m = train_binary([[0.0], [2.0]], [-1, 1], C=1e6, gamma=0.25, tol=1e-9)
    f = m.decision(np.array([[0.5], [0.99], [1.01], [1.5]]))
    assert f[0] < 0 and f[1] < 0 and f[2] > 0 and f[3] > 0
    assert m.decision([[1.0]])[0] == pytest.approx(0, abs=1e-8)


def _blobs(seed, n=20, d=2, sep=3.0):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.normal(-sep, 0.6, (n, d)), rng.normal(sep, 0.6, (n, d))])
    return x, np.repeat([-1.0, 1.0], n)


def test_separable_blobs():
    x, y = _blobs(0)
    C = 100.0
    m = train_binary(x, y, C, 0.1)
    assert (np.sign(m.decision(x)) == y).all()
    assert (np.abs(m.coef) < 0.99 * C).all()
    assert abs(m.coef.sum()) <= 1e-6
    # free support vectors of separable data predict their own label
    free = np.abs(m.coef) < C
    assert (np.sign(m.decision(m.sv[free])) == np.sign(m.coef[free])).all()


def test_duplicate_points_same_decision():
    x, y = _blobs(1, n=8)
    probe = np.random.default_rng(2).uniform(-5, 5, (50, 2))
    a = train_binary(x, y, 1e4, 0.2, tol=1e-10)
    b = train_binary(np.concatenate([x, x]), np.concatenate([y, y]), 1e4, 0.2, tol=1e-10)
    np.testing.assert_allclose(a.decision(probe), b.decision(probe), atol=1e-6)


def test_single_class_rejected():
    with pytest.raises(DegenerateError):
        train_binary([[0.0], [1.0]], [1, 1], 1.0, 1.0)


def test_iteration_cap():
    x, y = _blobs(3, n=15, sep=0.2)
    with pytest.raises(ConvergenceError) as exc:
        train_binary(x, y, 10.0, 1.0, max_iter=2)
    assert exc.value.gap > 0


@pytest.mark.parametrize("seed", range(20))
def test_dual_vs_reference_qp(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(6, 41))
    d = int(rng.integers(1, 6))
    x = rng.standard_normal((n, d))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y[0], y[1] = -1, 1
    C = float(rng.choice([0.1, 1.0, 10.0]))
    g = float(rng.choice([0.1, 0.5, 1.0]))
    m = train_binary(x, y, C, g)
    _, ref = solve_dual(rbf_gram(x, x, g), y, C)
    assert abs(m.dual_objective - ref) <= 1e-3 * abs(ref)
    assert kkt_violation(m, x, y, 1e-3) == 0
    alpha = m.alpha(n)
    assert (alpha >= 0).all() and (alpha <= C).all()
    assert abs(alpha @ y) <= 1e-6


def _three_class(seed=0, n=15):
    rng = np.random.default_rng(seed)
    centres = np.array([[0, 0], [6, 0], [0, 6]])
    x = np.concatenate([rng.normal(c, 0.7, (n, 2)) for c in centres])
    return x, np.repeat(np.array(["a", "b", "c"]), n)


def test_multiclass_separable():
    x, lab = _three_class()
    m = train_multiclass(x, lab, 10.0, 0.5)
    assert len(m.machines) == 3
    assert (m.predict(x) == lab).all()
    assert m.kkt_violation(x, lab) == 0


def test_multiclass_two_classes_matches_binary():
    x, y = _blobs(4, sep=0.8)
    lab = np.where(y > 0, 0, 1)  # class 0 is the +1 side of the pair machine
    mc = train_multiclass(x, lab, 1.0, 0.5)
    bi = train_binary(x, np.where(lab == 0, 1.0, -1.0), 1.0, 0.5)
    probe = np.random.default_rng(0).uniform(-3, 3, (100, 2))
    expected = np.where(bi.decision(probe) > 0, 0, 1)
    np.testing.assert_array_equal(mc.predict(probe), expected)


def test_permutation_invariance():
    x, lab = _three_class(1)
    rng = np.random.default_rng(5)
    x = x + rng.normal(0, 1.5, x.shape)  # overlapping classes
    perm = rng.permutation(len(x))
    probe = rng.uniform(-3, 9, (60, 2))
    a = train_multiclass(x, lab, 1.0, 0.5)
    b = train_multiclass(x[perm], lab[perm], 1.0, 0.5)
    np.testing.assert_array_equal(a.predict(probe), b.predict(probe))
    for key in a.machines:
        np.testing.assert_array_equal(a.machines[key].decision(probe), b.machines[key].decision(probe))


def test_vote_tie_breaks_by_margin_then_index():
    x, lab = _three_class(2)
    m = train_multiclass(x, lab, 1.0, 0.5)
    votes, margins = m.decision_votes(np.array([[3.0, 3.0], [0, 0]]))
    pred = m.predict(np.array([[3.0, 3.0], [0, 0]]))
    for r in range(2):
        cand = np.flatnonzero(votes[r] == votes[r].max())
        cand = cand[margins[r, cand] == margins[r, cand].max()]
        assert pred[r] == m.classes[cand[0]]


def test_standardizer_and_translation_invariance():
    x, lab = _three_class(3)
    shift = np.array([100.0, -40.0])
    s1, s2 = Standardizer.fit(x), Standardizer.fit(x + shift)
    m1 = train_multiclass(x, lab, 1.0, 0.5, s1, tol=1e-10)
    m2 = train_multiclass(x + shift, lab, 1.0, 0.5, s2, tol=1e-10)
    probe = np.random.default_rng(0).uniform(-2, 8, (40, 2))
    np.testing.assert_array_equal(m1.predict(probe), m2.predict(probe + shift))
    for k in m1.machines:
        np.testing.assert_allclose(m1.machines[k].decision(s1.transform(probe)),
                                   m2.machines[k].decision(s2.transform(probe + shift)), atol=1e-7)


def test_standardizer_zero_variance():
    x = np.array([[1.0, 5.0], [3.0, 5.0]])
    s = Standardizer.fit(x)
    np.testing.assert_array_equal(s.transform(x), [[-1, 0], [1, 0]])


def test_grid_single_candidate():
    x, lab = _three_class()
    r = grid_search(x, lab, x, lab, GridSearchSpec(Cs=(3.0,), gammas=(0.2,), scale_by_dim=False))
    assert (r.C, r.gamma) == (3.0, 0.2)


def test_grid_ties_prefer_fewest_support_vectors():
    x, lab = _three_class()
    xv, lv = _three_class(9)
    r = grid_search(x, lab, xv, lv, GridSearchSpec())
    assert r.accuracy == 1.0 and len(r.table) == 16
    perfect = [(train_multiclass(x, lab, c, g).n_support, c, g) for c, g, a in r.table if a == 1.0]
    assert (r.C, r.gamma) == min(perfect)[1:]


def test_grid_full_tie_prefers_smaller_C_then_gamma():
    # two points: the hard-margin alpha is 2 / (2 - 2 exp(-gamma)) < 10, so every C
    # gives the same two support vectors; only the C order decides
    x, lab = np.array([[0.0], [1.0]]), np.array(["a", "b"])
    r = grid_search(x, lab, x, lab, GridSearchSpec(Cs=(100.0, 10.0), gammas=(0.5,), scale_by_dim=False))
    assert (r.C, r.gamma) == (10.0, 0.5)


def test_grid_gamma_scaling():
    cands = GridSearchSpec().candidates(700)
    assert cands[0] == (0.1, 1e-3 / 700) and cands[-1] == (100.0, 1 / 700)
    with pytest.raises(ValueError):
        GridSearchSpec(Cs=())


def test_save_load_roundtrip(tmp_path):
    x, lab = _three_class()
    m = train_multiclass(x, lab, 1.0, 0.5, Standardizer.fit(x))
    save_svm(tmp_path / "svm.npz", m)
    m2 = load_svm(tmp_path / "svm.npz")
    probe = np.random.default_rng(0).uniform(-2, 8, (40, 2))
    np.testing.assert_array_equal(m.predict(probe), m2.predict(probe))
    for k in m.machines:
        np.testing.assert_array_equal(m.machines[k].decision(probe), m2.machines[k].decision(probe))
