"""Wilson intervals, replication determinism, study dispatch, outputs."""

import numpy as np
import pytest

from specsel.harness import (RateEstimate, StudyConfig, emit_outputs,
                             format_rates_csv, rate_estimate,
                             render_rate_chart, replicate_predictions,
                             resolve_threads, run_replications, run_study,
                             wilson_interval)
from specsel.models import Bernoulli


def test_wilson_edges():
    low, high = wilson_interval(0, 20)
    assert low == 0.0 and 0.0 < high < 0.25
    low, high = wilson_interval(20, 20)
    assert 0.75 < low < 1.0 and high <= 1.0
    low, high = wilson_interval(10, 20)
    assert low < 0.5 < high


def test_wilson_validation():
    with pytest.raises(ValueError):
        wilson_interval(1, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 4)


def test_wilson_covers_known_value():
    # 95% Wilson interval for 8/10 (classic worked example)
    low, high = wilson_interval(8, 10)
    assert low == pytest.approx(0.4902, abs=5e-4)
    assert high == pytest.approx(0.9433, abs=5e-4)


def test_rate_estimate_invariant():
    r = rate_estimate(1, "x", 10, "rf", 5, 10)
    assert 0 <= r.ci_low <= r.rate <= r.ci_high <= 1
    with pytest.raises(ValueError):
        RateEstimate(1, "x", 10, "rf", 5, 10, 0.5, 0.6, 0.7)


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("SPECSEL_THREADS", raising=False)
    assert resolve_threads() == 1
    assert resolve_threads(4) == 4
    monkeypatch.setenv("SPECSEL_THREADS", "3")
    assert resolve_threads() == 3
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_trivially_separated_candidates():
    true = Bernoulli(n=25, theta1=60.0)
    cands = [true, Bernoulli(n=25, theta1=-60.0)]
    est = run_replications(true, cands, 0, K=10, R=100, seed=5, threads=2)
    assert est.rate == 1.0
    assert est.ci_low >= 0.96


def test_replications_validation():
    true = Bernoulli(n=10, theta1=0.0)
    cands = [true, Bernoulli(n=10, theta1=1.0)]
    with pytest.raises(ValueError, match="R >= 1"):
        replicate_predictions(true, cands, K=5, R=0, seed=1)
    with pytest.raises(ValueError, match="true_index"):
        run_replications(true, cands, 7, K=5, R=2, seed=1)


def test_replications_order_independent_of_workers():
    true = Bernoulli(n=15, theta1=-1.0)
    cands = [true, Bernoulli(n=15, theta1=0.5)]
    seq = replicate_predictions(true, cands, K=8, R=12, seed=3, threads=1)
    par = replicate_predictions(true, cands, K=8, R=12, seed=3, threads=2)
    assert seq == par


def test_study_config_validation():
    with pytest.raises(ValueError, match="study id"):
        StudyConfig(study=7, seed=1)
    with pytest.raises(ValueError, match="R >= 1"):
        StudyConfig(study=1, seed=1, R=-1)
    with pytest.raises(ValueError, match="K >= 2"):
        StudyConfig(study=1, seed=1, K=1)
    cfg = StudyConfig(study=1, seed=1).resolved()
    assert cfg.R == 200 and cfg.K == 100
    assert cfg.grid == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    cfg5 = StudyConfig(study=5, seed=1).resolved()
    assert cfg5.classifiers == ("gbt", "random_forest", "gaussian_nb")


def test_r_zero_rejected_at_config_validation():
    with pytest.raises(ValueError, match="R >= 1"):
        StudyConfig(study=1, seed=1, sizes=(10,), grid=(0.0,), R=0, K=5)


def test_study1_shape_and_reproducibility():
    cfg = StudyConfig(study=1, seed=11, grid=(0.0, 0.4), sizes=(12,),
                      R=4, K=6, threads=2)
    rows = run_study(cfg)
    assert len(rows) == 2
    assert [r.setting for r in rows] == ["theta2=0", "theta2=0.4"]
    assert all(r.trials == 4 and r.classifier == "random_forest" for r in rows)
    rows2 = run_study(cfg)
    assert format_rates_csv(rows) == format_rates_csv(rows2)


def test_study2_runs_directed():
    cfg = StudyConfig(study=2, seed=13, grid=(0.5,), sizes=(12,), R=3, K=6)
    rows = run_study(cfg)
    assert len(rows) == 1
    assert rows[0].study == 2


def test_study3_reports_full_matrix():
    cfg = StudyConfig(study=3, seed=17, dims=(1, 2), sizes=(15,), R=4, K=6)
    rows = run_study(cfg)
    assert len(rows) == 4  # 2 true dims x 2 selected dims
    settings = {r.setting for r in rows}
    assert "true_k=1,selected_k=1" in settings
    assert "true_k=2,selected_k=1" in settings
    # each true dimension's selections sum to R
    for tk in (1, 2):
        total = sum(r.successes for r in rows if f"true_k={tk}," in r.setting)
        assert total == 4
    diag = [r for r in rows if r.series]
    assert len(diag) == 2


def test_study4_and_5_run():
    rows4 = run_study(StudyConfig(study=4, seed=19, grid=(0.5,), dims=(2,),
                                  sizes=(12,), R=3, K=6))
    assert rows4[0].setting == "sigma2=0.5,k=2"
    rows5 = run_study(StudyConfig(study=5, seed=23, grid=(0.0,), sizes=(10,),
                                  R=3, K=6,
                                  classifiers=("gaussian_nb", "random_forest")))
    assert {r.classifier for r in rows5} == {"gaussian_nb", "random_forest"}
    assert all(r.study == 5 for r in rows5)


def test_emit_outputs(tmp_path):
    cfg = StudyConfig(study=1, seed=29, grid=(0.0, 0.3), sizes=(10, 12),
                      R=3, K=5)
    rows = run_study(cfg)
    csv_path, svg_path = emit_outputs(rows, tmp_path)
    text = open(csv_path).read()
    lines = text.strip().split("\n")
    assert lines[0] == ("study,setting,n,classifier,successes,trials,"
                        "rate,ci_low,ci_high")
    assert len(lines) == 1 + 4  # grid x sizes
    svg = open(svg_path).read()
    assert svg.count("<polyline") == 2  # one polyline per network size
    assert "</svg>" in svg
    # byte-identical rerun
    emit_outputs(rows, tmp_path)
    assert open(csv_path).read() == text


def test_emit_outputs_empty_table(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        emit_outputs([], tmp_path)
    assert not (tmp_path / "study0.csv").exists()


def test_render_chart_requires_series():
    row = rate_estimate(3, "true_k=1,selected_k=2", 10, "rf", 1, 4)
    with pytest.raises(ValueError, match="plottable"):
        render_rate_chart([row], "t", "x")
