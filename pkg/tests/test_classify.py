"""Feature building, the three classifiers, score algebra, persistence."""

import numpy as np
import pytest

from specsel.classify import (ALGORITHMS, DesignMatrix, FeatureConfig,
                              TrainedClassifier, build_features, feature_row,
                              load_classifier, make_scores, normalize_scores,
                              predict_scores, save_classifier, train)
from specsel.classify import _raw_scores
from specsel.graphs import Graph
from specsel.spectra import spectrum


def blob_design(rng, m=2, rows_per=100, width=5, sep=3.0):
    rows, labels = [], []
    for c in range(m):
        center = (-sep if c == 0 else sep)
        rows.append(rng.normal(center, 1.0, size=(rows_per, width)))
        labels += [c] * rows_per
    return DesignMatrix(np.vstack(rows), np.array(labels),
                        [f"f{i}" for i in range(width)])


# -- features ---------------------------------------------------------------

def test_feature_config_validation():
    with pytest.raises(ValueError, match="unknown engineered"):
        FeatureConfig(engineered=("sum", "median"))
    with pytest.raises(ValueError, match="at least one"):
        FeatureConfig(use_raw_spectrum=False, engineered=())
    cfg = FeatureConfig.from_json({"use_raw_spectrum": False,
                                   "engineered": ["sum", "max"]})
    assert cfg.engineered == ("sum", "max")
    with pytest.raises(ValueError, match="unknown feature config"):
        FeatureConfig.from_json({"raw": True})


def test_build_features_raw_only():
    k3 = spectrum(Graph.complete(3)).values
    d = build_features([k3, k3], [0, 1], FeatureConfig(engineered=()))
    assert d.rows.shape == (2, 3)
    np.testing.assert_allclose(d.rows[0], d.rows[1])
    np.testing.assert_allclose(d.rows[0], [0, 3, 3], atol=1e-9)
    assert d.feature_names == ["lambda_1", "lambda_2", "lambda_3"]


def test_engineered_sum_is_twice_edges():
    k3 = spectrum(Graph.complete(3)).values
    row = feature_row(k3, FeatureConfig(use_raw_spectrum=False,
                                        engineered=("sum",)))
    assert row == pytest.approx([6.0], abs=1e-9)


def test_engineered_zero_count_counts_components():
    two = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    row = feature_row(spectrum(two).values,
                      FeatureConfig(use_raw_spectrum=False,
                                    engineered=("zero_count",)))
    assert row == pytest.approx([2.0])


def test_engineered_quantiles_and_max():
    vals = np.arange(11, dtype=float)
    cfg = FeatureConfig(use_raw_spectrum=False, engineered=("quantiles", "max"))
    row = feature_row(vals, cfg)
    assert row.size == 12
    np.testing.assert_allclose(row[:11], np.arange(11.0))
    assert row[-1] == 10.0


def test_build_features_errors():
    with pytest.raises(ValueError, match="no spectra"):
        build_features([], [], FeatureConfig())
    with pytest.raises(ValueError, match="mixed"):
        build_features([np.zeros(3), np.zeros(4)], [0, 1], FeatureConfig())
    with pytest.raises(ValueError, match="same number"):
        build_features([np.zeros(3)] * 3, [0, 0, 1], FeatureConfig())
    with pytest.raises(ValueError, match="non-finite"):
        DesignMatrix(np.array([[np.nan]]), np.array([0]), ["f0"])


# -- score algebra ------------------------------------------------------------

def test_normalize_examples():
    np.testing.assert_allclose(normalize_scores([0.08, 0.16, 0.76]),
                               [0.105, 0.211, 1.0], atol=5e-4)
    np.testing.assert_allclose(normalize_scores([0.25] * 4), [1.0] * 4)
    np.testing.assert_allclose(normalize_scores([0.410, 0.590]),
                               [0.695, 1.0], atol=5e-4)
    np.testing.assert_allclose(normalize_scores([1.0]), [1.0])


def test_normalize_errors():
    with pytest.raises(ValueError, match="all-zero"):
        normalize_scores([0.0, 0.0])
    with pytest.raises(ValueError, match="empty"):
        normalize_scores([])
    with pytest.raises(ValueError, match="non-negative"):
        normalize_scores([0.5, -0.1])


def test_normalize_preserves_argmax():
    rng = np.random.default_rng(4)
    for _ in range(500):
        s = rng.dirichlet(np.ones(int(rng.integers(2, 8))))
        sn = normalize_scores(s)
        assert np.argmax(sn) == np.argmax(s)
        assert sn.max() == 1.0


def test_appending_weaker_class_keeps_ratios():
    s = np.array([0.08, 0.16, 0.76])
    sn = normalize_scores(s)
    extended = normalize_scores(np.append(s * 0.9, 0.1 * 0.76))
    np.testing.assert_allclose(extended[:3], sn, atol=1e-12)


# -- classifiers ----------------------------------------------------------------

def test_separable_blobs_all_algorithms():
    rng = np.random.default_rng(0)
    d = blob_design(rng)
    held = rng.normal(3.0, 1.0, size=(50, 5))
    for algo in ALGORITHMS:
        clf = train(d, algo, seed=1)
        assert clf.in_sample_accuracy == 1.0
        preds = np.argmax(_raw_scores(clf, held), axis=1)
        assert np.mean(preds == 1) >= 0.95


def test_nb_symmetric_query_splits_evenly():
    rows = np.array([[-1.0], [-2.0], [1.0], [2.0]])
    d = DesignMatrix(rows, np.array([0, 0, 1, 1]), ["f0"])
    clf = train(d, "gaussian_nb")
    sv = predict_scores(clf, np.array([0.0]))
    np.testing.assert_allclose(sv.s, [0.5, 0.5], atol=1e-12)
    assert sv.predicted == 0  # tie resolves to the lowest class index


def test_nb_survives_constant_feature():
    rows = np.zeros((6, 2))
    rows[3:, 1] = 1.0
    d = DesignMatrix(rows, np.array([0, 0, 0, 1, 1, 1]), ["c", "f"])
    clf = train(d, "gaussian_nb")
    assert predict_scores(clf, np.array([0.0, 1.0])).predicted == 1


def test_forest_query_identical_to_class_rows():
    rng = np.random.default_rng(2)
    rows = np.vstack([rng.normal(0, 0.1, size=(20, 3)),
                      np.tile([5.0, 5.0, 5.0], (20, 1))])
    d = DesignMatrix(rows, np.array([0] * 20 + [1] * 20), ["a", "b", "c"])
    clf = train(d, "random_forest", seed=3)
    sv = predict_scores(clf, np.array([5.0, 5.0, 5.0]))
    assert sv.predicted == 1
    assert sv.s_norm[1] == 1.0


def test_forest_propensities_never_zero():
    rng = np.random.default_rng(5)
    d = blob_design(rng, m=3, rows_per=30)
    clf = train(d, "random_forest", seed=9)
    sv = predict_scores(clf, np.full(5, -3.0))
    assert np.all(sv.s > 0)
    assert sv.s.sum() == pytest.approx(1.0, abs=1e-9)


def test_permutation_null_no_leakage():
    # shuffled labels: held-out accuracy compatible with chance for M=2
    rng = np.random.default_rng(6)
    X = rng.normal(size=(500, 20))
    y = np.array([0, 1] * 250)
    d = DesignMatrix(X[:400], y[:400], [f"f{i}" for i in range(20)])
    for algo in ("random_forest", "gaussian_nb"):
        clf = train(d, algo, seed=11)
        preds = np.argmax(_raw_scores(clf, X[400:]), axis=1)
        acc = np.mean(preds == y[400:])
        assert abs(acc - 0.5) < 0.1


def test_gbt_learns_nonlinear_boundary():
    rng = np.random.default_rng(7)
    X = rng.uniform(-1, 1, size=(300, 2))
    y = (X[:, 0] * X[:, 1] > 0).astype(int)
    d = DesignMatrix(X[:240], y[:240], ["a", "b"])
    clf = train(d, "gbt", seed=13)
    preds = np.argmax(_raw_scores(clf, X[240:]), axis=1)
    assert np.mean(preds == y[240:]) >= 0.9


def test_train_validation():
    rng = np.random.default_rng(8)
    d = blob_design(rng, rows_per=10)
    with pytest.raises(ValueError, match="unknown algorithm"):
        train(d, "xgboost")
    with pytest.raises(ValueError, match="hyperparameter"):
        train(d, "random_forest", hyper={"depth": 3})
    single = DesignMatrix(np.zeros((4, 2)), np.zeros(4, dtype=int), ["a", "b"])
    with pytest.raises(ValueError, match="2 classes"):
        train(single, "gaussian_nb")


def test_determinism_across_fits():
    rng = np.random.default_rng(9)
    d = blob_design(rng, rows_per=40)
    q = rng.normal(size=5)
    for algo in ALGORITHMS:
        s1 = predict_scores(train(d, algo, seed=21), q).s
        s2 = predict_scores(train(d, algo, seed=21), q).s
        np.testing.assert_array_equal(s1, s2)


def test_predict_width_mismatch():
    rng = np.random.default_rng(10)
    clf = train(blob_design(rng, rows_per=10), "gaussian_nb")
    with pytest.raises(ValueError, match="width"):
        predict_scores(clf, np.zeros(4))


def test_single_class_degenerate_scores():
    # a one-class model (below train()'s contract) still scores s = (1,)
    clf = TrainedClassifier("gaussian_nb", 1, 2, ["a", "b"],
                            {"means": np.zeros((1, 2)),
                             "variances": np.ones((1, 2)),
                             "priors": np.ones(1)})
    sv = predict_scores(clf, np.zeros(2))
    np.testing.assert_allclose(sv.s, [1.0])
    np.testing.assert_allclose(sv.s_norm, [1.0])


def test_make_scores_invariants():
    sv = make_scores(np.array([0.2, 0.3, 0.5]))
    assert sv.s_norm.max() == 1.0
    assert sv.predicted == 2


# -- persistence ------------------------------------------------------------------

def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(12)
    d = blob_design(rng, m=3, rows_per=20)
    q = rng.normal(size=5)
    for algo in ALGORITHMS:
        clf = train(d, algo, seed=5)
        path = tmp_path / f"{algo}.json"
        save_classifier(clf, path)
        loaded = load_classifier(path)
        assert loaded.feature_names == clf.feature_names
        np.testing.assert_array_equal(predict_scores(loaded, q).s,
                                      predict_scores(clf, q).s)


def test_load_rejects_version_mismatch(tmp_path):
    rng = np.random.default_rng(13)
    clf = train(blob_design(rng, rows_per=10), "gaussian_nb")
    path = tmp_path / "clf.json"
    save_classifier(clf, path)
    doc = path.read_text().replace('"format_version": 1', '"format_version": 99')
    path.write_text(doc)
    with pytest.raises(ValueError, match="version"):
        load_classifier(path)
