"""Metric identities, histogram bookkeeping, and the evaluation bundle."""

import numpy as np
import pytest

from gaitbac.errors import ZeroVarianceTarget
from gaitbac.evaluation import (
    EvaluationResult,
    evaluate,
    fit_line,
    format_five_metric_table,
    format_mse_r_table,
    histogram,
    metrics,
    pooled_histogram,
    write_histogram_csv,
    write_metrics_json,
    write_scatter_csv,
)
from gaitbac.mlp import Dataset


class TestMetrics:
    def test_perfect_predictor(self):
        y = np.array([0.0, 0.1, 0.2, 0.05])
        rep = metrics(y, y)
        assert rep.mse == 0.0
        assert rep.r == 1.0
        assert rep.rae_percent == 0.0
        assert rep.rrse_percent == 0.0

    def test_mean_predictor_normalization(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        pred = np.full(4, y.mean())
        rep = metrics(pred, y)
        assert rep.rae_percent == pytest.approx(100.0, abs=1e-12)
        assert rep.rrse_percent == pytest.approx(100.0, abs=1e-12)
        assert rep.r == 0.0  # constant prediction vector

    def test_constant_offset(self):
        y = np.linspace(0, 1, 50)
        rep = metrics(y + 0.01, y)
        assert rep.mae == pytest.approx(0.01, abs=1e-12)
        assert rep.rmse == pytest.approx(0.01, abs=1e-12)
        assert rep.r == pytest.approx(1.0, abs=1e-12)

    def test_rmse_is_sqrt_mse(self):
        rng = np.random.default_rng(0)
        pred, y = rng.normal(size=100), rng.normal(size=100)
        rep = metrics(pred, y)
        assert rep.rmse == pytest.approx(np.sqrt(rep.mse), abs=1e-12)
        assert -1.0 <= rep.r <= 1.0
        assert rep.rae_percent >= 0 and rep.rrse_percent >= 0

    def test_scale_equivariance(self):
        rng = np.random.default_rng(1)
        pred, y = rng.normal(size=80), rng.normal(size=80)
        base = metrics(pred, y)
        for k in (2.0, 7.5, 0.3):
            scaled = metrics(k * pred, k * y)
            assert scaled.r == pytest.approx(base.r, abs=1e-10)
            assert scaled.rae_percent == pytest.approx(base.rae_percent, rel=1e-10)
            assert scaled.rrse_percent == pytest.approx(base.rrse_percent, rel=1e-10)
            assert scaled.mae == pytest.approx(k * base.mae, rel=1e-10)
            assert scaled.rmse == pytest.approx(k * base.rmse, rel=1e-10)

    def test_rrse_vs_mean_predictor(self):
        y = np.array([0.0, 1.0, 2.0, 3.0])
        better = y + np.array([0.1, -0.1, 0.1, -0.1])   # beats the mean
        worse = np.array([3.0, 0.0, 3.0, 0.0])          # loses to the mean
        assert metrics(better, y).rrse_percent < 100.0
        assert metrics(worse, y).rrse_percent > 100.0

    def test_zero_variance_target_absent_by_default(self):
        y = np.full(5, 0.2)
        rep = metrics(np.linspace(0, 1, 5), y)
        assert rep.rae_percent is None
        assert rep.rrse_percent is None
        assert rep.r == 0.0

    def test_zero_variance_target_strict(self):
        with pytest.raises(ZeroVarianceTarget):
            metrics(np.linspace(0, 1, 5), np.full(5, 0.2), require_relative=True)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            metrics(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            metrics(np.ones(1), np.ones(1))


class TestHistogram:
    def test_all_zero_errors_single_bin(self):
        hist = histogram(np.zeros(37))
        assert hist.n_bins == 20
        assert hist.total("all") == 37
        assert np.count_nonzero(hist.counts["all"]) == 1

    def test_uniform_grid_even_counts(self):
        errors = np.linspace(-1, 1, 200, endpoint=False) + 1.0 / 200
        hist = histogram(errors, bins=20)
        assert np.all(hist.counts["all"] == 10)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        e = rng.normal(size=300)
        h1 = histogram(e)
        h2 = histogram(rng.permutation(e))
        assert np.array_equal(h1.counts["all"], h2.counts["all"])
        assert np.array_equal(h1.bin_edges, h2.bin_edges)

    def test_pooled_edges_shared(self):
        rng = np.random.default_rng(3)
        hist = pooled_histogram({"train": rng.normal(size=120),
                                 "test": rng.normal(size=40)}, bins=20)
        assert hist.total("train") == 120
        assert hist.total("test") == 40
        assert hist.bin_edges.shape == (21,)


class ConstantModel:
    def __init__(self, value):
        self.value = value

    def predict(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.value)


class OracleModel:
    """Predicts the hidden linear rule exactly."""

    def __init__(self, w):
        self.w = np.asarray(w)

    def predict(self, X):
        return np.atleast_2d(X) @ self.w


class TestEvaluate:
    def make_splits(self, seed=4):
        rng = np.random.default_rng(seed)
        w = np.array([0.5, -0.25, 0.1])
        Xtr, Xte = rng.uniform(-1, 1, (60, 3)), rng.uniform(-1, 1, (30, 3))
        return (Dataset(Xtr, Xtr @ w), Dataset(Xte, Xte @ w), OracleModel(w))

    def test_oracle_scores_r_one(self):
        train, test, model = self.make_splits()
        result = evaluate(model, train, test)
        assert result.metrics["train"].r == pytest.approx(1.0, abs=1e-12)
        assert result.metrics["test"].r == pytest.approx(1.0, abs=1e-12)
        assert result.metrics["all"].n == 90

    def test_split_bookkeeping(self):
        train, test, model = self.make_splits(seed=5)
        result = evaluate(model, train, test)
        assert result.metrics["train"].n == train.n
        assert result.metrics["test"].n == test.n
        assert result.histogram.total("train") == train.n
        assert result.histogram.total("test") == test.n
        tags = [tag for _, _, tag in result.scatter]
        assert tags.count("train") == train.n
        assert tags.count("test") == test.n

    def test_fit_lines(self):
        train, test, model = self.make_splits(seed=6)
        result = evaluate(model, train, test)
        assert result.fit_lines["train"].slope == pytest.approx(1.0, abs=1e-9)
        assert result.fit_lines["train"].intercept == pytest.approx(0.0, abs=1e-9)
        line = fit_line(np.zeros(5), np.arange(5.0))
        assert line.slope == 0.0
        assert line.intercept == 2.0

    def test_file_exports(self, tmp_path):
        train, test, model = self.make_splits(seed=7)
        result = evaluate(model, train, test)
        mpath = write_metrics_json(result, tmp_path / "metrics.json")
        hpath = write_histogram_csv(result.histogram, tmp_path / "histogram.csv")
        spath = write_scatter_csv(result, tmp_path / "scatter.csv")
        assert mpath.exists() and hpath.exists() and spath.exists()
        lines = spath.read_text().strip().splitlines()
        assert lines[0] == "target,prediction,split"
        assert len(lines) == 1 + 90

    def test_tables_render(self):
        train, test, model = self.make_splits(seed=8)
        result = evaluate(model, train, test)
        rows = {"model-a": result.metrics["test"],
                "model-b": result.metrics["train"]}
        t1 = format_mse_r_table(rows, "Held-out comparison")
        t2 = format_five_metric_table(rows, "Technique comparison")
        assert "MSE" in t1 and "model-a" in t1
        assert "RRSE" in t2 and "model-b" in t2
