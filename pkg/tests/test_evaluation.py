import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tabautodiff.evaluation import (MissingScoresError, TstrConfig, builtin_model, corr_l2_diff,
                                   correlation_matrices, dcr, evaluate_tables, heatmap_export,
                                   js_divergence, mean_dcr, pearson_matrix, rank_aggregate,
                                   split_real, theils_u, theils_u_matrix, tstr_evaluate,
                                   wasserstein_1d)
from tabautodiff.evaluation.fidelity import CorrelationMatrices, correlation_ratio, entropy
from tabautodiff.evaluation.privacy import dcr_matrix
from tabautodiff.evaluation.report import HIGHER, LOWER, read_heatmap
from tabautodiff.fixtures import classification_fixture, mixed_fixture, regression_fixture
from tabautodiff.schema import infer_schema


def test_wd_examples():
    assert wasserstein_1d([1, 2, 3], [1, 2, 3]) == 0.0
    assert wasserstein_1d([1, 2, 3], [2, 3, 4]) == pytest.approx(1.0)
    a, b = np.random.default_rng(0).normal(size=7), np.random.default_rng(1).normal(size=11)
    assert abs(wasserstein_1d(a, b) - wasserstein_1d(b, a)) < 1e-12
    with pytest.raises(ValueError):
        wasserstein_1d([], [1.0])


def test_wd_normalized_by_real_range():
    assert wasserstein_1d([0, 10], [10, 20], normalize_by=(0.0, 10.0)) == pytest.approx(1.0)


def test_js_examples():
    assert js_divergence(list("abca"), list("aacb")) == 0.0
    assert js_divergence(["a", "a"], ["b"]) == pytest.approx(1.0)
    # P = (1/2, 1/2), Q = (1, 0): 1/2 [ 1/2 log2(2/3) + 1/2 log2(2) ] + 1/2 log2(4/3)
    expected = 0.5 * (0.5 * math.log2(2 / 3) + 0.5 * 1.0) + 0.5 * math.log2(4 / 3)
    assert expected == pytest.approx(0.3113, abs=1e-4)
    assert js_divergence(["x", "y"], ["x", "x"]) == pytest.approx(expected, abs=1e-12)


def test_pearson_self_and_constant():
    x = np.arange(5.0)
    R = pearson_matrix(np.column_stack([x, 2 * x + 1, np.ones(5)]))
    np.testing.assert_allclose(R[:2, :2], 1.0)
    assert R[0, 2] == 0.0 and R[2, 2] == 1.0
    with pytest.raises(ValueError):
        pearson_matrix(np.ones((1, 2)))


def test_theils_u_examples():
    x = list("aabbccdd")
    assert theils_u(x, x) == 1.0
    # balanced 4 x 2 table: each y value sees every x value equally often
    y = list("pqpqpqpq")
    assert theils_u(x, y) == 0.0
    assert theils_u(["k"] * 5, list("abcde")) == 1.0


def test_theils_u_is_asymmetric():
    x, y = list("aabbccdd"), list("ppppqqqq")
    U = theils_u_matrix([x, y])
    assert U[1, 0] == pytest.approx(1.0)  # x determines y
    assert U[0, 1] == pytest.approx(0.5)  # y halves the entropy of x
    assert U[0, 1] == pytest.approx(oracles.theils_u_count(x, y), abs=1e-12)


def test_correlation_ratio_extremes():
    cats = list("aabb")
    assert correlation_ratio(cats, [1.0, 3.0, 3.0, 1.0]) == 0.0
    assert correlation_ratio(cats, [1.0, 1.0, 5.0, 5.0]) == pytest.approx(1.0)
    assert correlation_ratio(cats, [2.0] * 4) == 0.0


def _mats(p, u, c):
    return CorrelationMatrices(np.array(p, float), np.array(u, float), np.array(c, float), [], [])


def test_corr_l2_diff():
    rng = np.random.default_rng(0)
    A = _mats(rng.normal(size=(3, 3)), rng.random((3, 3)), rng.random((3, 3)))
    assert corr_l2_diff(A, A) == {"pearson": 0.0, "theils_u": 0.0, "corr_ratio": 0.0}
    B = _mats(A.pearson.copy(), A.theils_u, A.corr_ratio)
    B.pearson[1, 2] += 0.37
    assert corr_l2_diff(A, B)["pearson"] == pytest.approx(0.37, abs=1e-12)
    C = _mats(rng.normal(size=(3, 3)), rng.random((3, 3)), rng.random((3, 3)))
    got = corr_l2_diff(A, C)
    for kind in ("pearson", "theils_u", "corr_ratio"):
        R, S = getattr(A, kind), getattr(C, kind)
        brute = math.sqrt(sum((R[i, j] - S[i, j]) ** 2 for i in range(3) for j in range(3)))
        assert got[kind] == pytest.approx(brute, abs=1e-12)


def test_dcr_examples():
    real = pd.DataFrame({"a": [0.0], "b": [0.0]})
    assert mean_dcr(real, pd.DataFrame({"a": [3.0], "b": [4.0]})) == pytest.approx(5.0)
    t = mixed_fixture(30)
    d = dcr(t, t.iloc[[4, 9]])
    np.testing.assert_array_equal(d, [0.0, 0.0])


def test_dcr_one_hot_categories():
    real = pd.DataFrame({"x": [0.0, 0.0], "c": ["u", "v"]})
    syn = pd.DataFrame({"x": [0.0], "c": ["w"]})
    assert mean_dcr(real, syn) == pytest.approx(math.sqrt(2))


def test_oracle_equivalence_small_tables():
    rng = np.random.default_rng(123)
    for _ in range(30):
        n, m = int(rng.integers(2, 21)), int(rng.integers(1, 21))
        a, b = rng.normal(size=n).round(1), rng.normal(size=m).round(1)
        assert abs(wasserstein_1d(a, b) - oracles.wd_transport(a, b)) < 1e-9
        p, q = rng.choice(list("abcd"), n), rng.choice(list("abce"), m)
        assert abs(js_divergence(p, q) - oracles.js_direct(list(p), list(q))) < 1e-9
        x, y = rng.normal(size=n), rng.normal(size=n)
        assert abs(pearson_matrix(np.column_stack([x, y]))[0, 1]
                   - oracles.pearson_definition(list(x), list(y))) < 1e-9
        cx, cy = list(rng.choice(list("abc"), n)), list(rng.choice(list("pq"), n))
        assert abs(entropy(cx) - oracles.entropy_count(cx)) < 1e-9
        assert abs(theils_u(cx, cy) - oracles.theils_u_count(cx, cy)) < 1e-9
        assert abs(correlation_ratio(cx, x) - oracles.corr_ratio_loops(cx, list(x))) < 1e-9
        R, S = rng.normal(size=(n, 3)), rng.normal(size=(m, 3))
        np.testing.assert_allclose(dcr_matrix(R, S), oracles.dcr_double_loop(R, S), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12),
       st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12))
def test_wd_matches_transport_oracle(a, b):
    assert abs(wasserstein_1d(a, b) - oracles.wd_transport(a, b)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=15),
       st.lists(st.sampled_from("abcd"), min_size=1, max_size=15))
def test_metric_bounds(p, q):
    assert 0.0 <= js_divergence(p, q) <= 1.0
    n = min(len(p), len(q))
    assert 0.0 <= theils_u(p[:n], q[:n]) <= 1.0
    assert 0.0 <= correlation_ratio(p, np.arange(len(p), dtype=float)) <= 1.0


def test_correlation_matrices_shapes():
    t = mixed_fixture(200)
    s = infer_schema(t)
    cm = correlation_matrices(t, s)
    assert cm.pearson.shape == (3, 3) and cm.theils_u.shape == (2, 2)
    assert cm.corr_ratio.shape == (2, 3)
    np.testing.assert_allclose(cm.pearson, cm.pearson.T)


def test_tstr_identity_classification():
    real = classification_fixture(400, seed=1)
    cfg = TstrConfig("multiclass", seed=3)
    train, _ = split_real(real, cfg)
    res = tstr_evaluate(real, train, "target", cfg)
    assert res.real == res.synthetic
    assert set(res.real) == {"logistic_regression", "decision_tree", "knn"}
    assert all("auroc" in m for m in res.real.values())


def test_tstr_identity_regression():
    real = regression_fixture(300, seed=2)
    cfg = TstrConfig("regression", seed=0)
    train, _ = split_real(real, cfg)
    res = tstr_evaluate(real, train, "target", cfg)
    assert res.real == res.synthetic


def test_tstr_single_class_synthetic_is_degenerate():
    real = classification_fixture(200, n_classes=2)
    syn = real[real["target"] == real["target"].iloc[0]]
    res = tstr_evaluate(real, syn, "target", TstrConfig("binary", models=("decision_tree",)))
    assert res.degenerate == ["synthetic:decision_tree"]
    assert "auroc" not in res.synthetic["decision_tree"]
    assert "auroc" in res.real["decision_tree"]


def test_tstr_config_validation():
    with pytest.raises(ValueError):
        TstrConfig("binary", split=1.0)
    with pytest.raises(ValueError):
        TstrConfig("regression", models=("knn",))
    with pytest.raises(ValueError):
        TstrConfig("ordinal")
    with pytest.raises(KeyError):
        tstr_evaluate(regression_fixture(20), regression_fixture(20), "nope",
                      TstrConfig("regression"))


def test_constant_regressor_has_zero_r2():
    from sklearn.dummy import DummyRegressor
    from sklearn.metrics import r2_score
    y = np.random.default_rng(0).normal(size=50)
    pred = DummyRegressor().fit(np.zeros((50, 1)), y).predict(np.zeros((50, 1)))
    assert r2_score(y, pred) == pytest.approx(0.0, abs=1e-12)


def test_builtin_model_examples():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-3, 0.5, (40, 2)), rng.normal(3, 0.5, (40, 2))])
    y = np.array([0] * 40 + [1] * 40)
    assert builtin_model("logistic_regression").fit(X, y).score(X, y) == 1.0
    assert builtin_model("knn").set_params(n_neighbors=1).fit(X, y).score(X, y) == 1.0
    from tabautodiff.evaluation import decision_tree
    stump = decision_tree(max_depth=0).fit(X, np.array([0] * 30 + [1] * 50))
    np.testing.assert_array_equal(stump.predict(X), 1)
    P = builtin_model("decision_tree").fit(X, y).predict_proba(X)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    W = rng.normal(size=(60, 3))
    t = W @ np.array([1.0, -2.0, 0.5]) + 4.0
    assert builtin_model("linear_regression").fit(W, t).score(W, t) == pytest.approx(1.0, abs=1e-9)


def test_rank_examples():
    df = pd.DataFrame({"d1": [1.0, 2.0, 3.0]}, index=list("abc"))
    assert rank_aggregate(df).tolist() == [1.0, 2.0, 3.0]
    assert rank_aggregate(df, HIGHER).tolist() == [3.0, 2.0, 1.0]
    eq = pd.DataFrame({"d1": [5.0] * 4}, index=list("abcd"))
    assert rank_aggregate(eq).tolist() == [2.5] * 4
    two = pd.DataFrame({"d1": [1.0, 2.0], "d2": [2.0, 1.0]}, index=["m", "n"])
    assert rank_aggregate(two).tolist() == [1.5, 1.5]


def test_rank_missing_cells_named():
    df = pd.DataFrame({"d1": [1.0, np.nan], "d2": [1.0, 2.0]}, index=["m", "n"])
    with pytest.raises(MissingScoresError) as exc:
        rank_aggregate(df)
    assert "('n', 'd1')" in str(exc.value)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=6, max_size=6))
def test_rank_invariant_under_monotone_transform(vals):
    # integer scores keep the cubic transform exact (and strictly monotone) in floats
    df = pd.DataFrame(np.array(vals, float).reshape(3, 2), index=list("abc"), columns=["d1", "d2"])
    a = rank_aggregate(df, LOWER)
    b = rank_aggregate(df**3 + 2 * df - 7, LOWER)
    pd.testing.assert_series_equal(a, b)


def test_heatmap_round_trip(tmp_path):
    t = mixed_fixture(150)
    s = infer_schema(t)
    cm = correlation_matrices(t, s)
    paths = heatmap_export(cm, cm, tmp_path)
    assert len(paths) == 9
    for p in paths:
        grid = read_heatmap(p)
        kind = p.stem.rsplit("_", 1)[0]
        M = getattr(cm, kind)
        assert grid.shape == M.shape
        if p.stem.endswith("difference"):
            assert np.all(grid.to_numpy() == 0.0)
        else:
            np.testing.assert_allclose(grid.to_numpy(), M, atol=1e-9, rtol=0)


def test_self_evaluation_is_zero(tmp_path):
    real = mixed_fixture(200)
    rep = evaluate_tables(real, {"self": [real]}, target="member")
    sc = rep.scores["self"]
    assert all(v == 0.0 for v in sc.wd.values()) and all(v == 0.0 for v in sc.js.values())
    assert all(v == 0.0 for v in sc.corr_l2.values())
    assert sc.mdcr == 0.0
    assert rep.task == "binary"
    paths = rep.write(tmp_path)
    assert {p.name for p in paths} >= {"report.json", "table1.csv", "table2.csv", "table3.csv"}


def test_two_models_give_two_rank_rows():
    real = mixed_fixture(150)
    noisy = real.copy()
    noisy["income"] = noisy["income"] * 1.5
    rep = evaluate_tables(real, {"a": [real], "b": [noisy, real]})
    t1 = rep.table1()
    assert len(t1) == 2 and rep.replicas == {"a": 1, "b": 2}
    assert rep.ranks["wd"]["a"] < rep.ranks["wd"]["b"]
    # lower MDCR (closer copies) gets the larger rank number
    assert rep.ranks["mdcr"]["a"] > rep.ranks["mdcr"]["b"]
