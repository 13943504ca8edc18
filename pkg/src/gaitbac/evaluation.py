"""Regression metrics, error histograms, scatter exports, and report tables.

``r`` is the Pearson correlation between predictions and targets (not
R^2), defined as 0 when either vector is constant. The relative metrics
normalize by the constant-mean predictor: RAE on absolute error, RRSE on
squared error, both in percent; they are undefined (reported absent) when
the target has zero variance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ZeroVarianceTarget
from .mlp import Dataset


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    r: float
    mae: float
    rmse: float
    rae_percent: float | None
    rrse_percent: float | None
    n: int

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "r": self.r,
            "mae": self.mae,
            "rmse": self.rmse,
            "rae_percent": self.rae_percent,
            "rrse_percent": self.rrse_percent,
            "n": self.n,
        }


def metrics(pred: np.ndarray, target: np.ndarray,
            require_relative: bool = False) -> MetricsReport:
    """Standard regression metrics for one prediction/target pair.

    With ``require_relative`` a zero-variance target raises
    ZeroVarianceTarget; otherwise the RAE/RRSE fields are simply None.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 1:
        raise ValueError("pred and target must be 1-d vectors of equal length")
    n = pred.shape[0]
    if n < 2:
        raise ValueError("metrics need at least 2 samples")

    err = pred - target
    mse = float(err @ err) / n
    mae = float(np.abs(err).mean())
    rmse = math.sqrt(mse)
    r = _pearson(pred, target)

    dev = target - target.mean()
    abs_denom = float(np.abs(dev).sum())
    sq_denom = float(dev @ dev)
    if abs_denom == 0.0 or sq_denom == 0.0:
        if require_relative:
            raise ZeroVarianceTarget("RAE/RRSE undefined for a constant target")
        rae = rrse = None
    else:
        rae = 100.0 * float(np.abs(err).sum()) / abs_denom
        rrse = 100.0 * math.sqrt(float(err @ err) / sq_denom)
    return MetricsReport(mse=mse, r=r, mae=mae, rmse=rmse,
                         rae_percent=rae, rrse_percent=rrse, n=n)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        return 0.0
    return float(da @ db) / denom


@dataclass
class ErrorHistogram:
    """Equal-width histogram of prediction errors, shared bin edges across
    split tags. Bins are right-open except the last."""

    bin_edges: np.ndarray           # (bins + 1,)
    counts: dict[str, np.ndarray]   # tag -> (bins,) integer counts

    @property
    def n_bins(self) -> int:
        return int(self.bin_edges.shape[0] - 1)

    def total(self, tag: str) -> int:
        return int(self.counts[tag].sum())


def histogram(errors: np.ndarray, bins: int = 20, tag: str = "all") -> ErrorHistogram:
    """Histogram of one error vector over [min, max] with equal bins."""
    return pooled_histogram({tag: np.asarray(errors, dtype=np.float64)}, bins=bins)


def pooled_histogram(errors_by_tag: Mapping[str, np.ndarray],
                     bins: int = 20) -> ErrorHistogram:
    """Histogram with edges pooled over every tag's errors, so the split
    counts are directly comparable bin by bin."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    arrays = {tag: np.asarray(v, dtype=np.float64) for tag, v in errors_by_tag.items()}
    pooled = np.concatenate([v for v in arrays.values() if v.size]) if arrays else np.array([])
    if pooled.size == 0:
        raise ValueError("no errors to histogram")
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:  # degenerate range: one sample-wide bin band around the value
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts = {tag: np.histogram(v, bins=edges)[0] for tag, v in arrays.items()}
    return ErrorHistogram(bin_edges=edges, counts=counts)


@dataclass(frozen=True)
class FitLine:
    """Least-squares line of predictions against targets."""

    slope: float
    intercept: float


def fit_line(target: np.ndarray, pred: np.ndarray) -> FitLine:
    target = np.asarray(target, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    dev = target - target.mean()
    denom = float(dev @ dev)
    if denom == 0.0:
        return FitLine(slope=0.0, intercept=float(pred.mean()))
    slope = float(dev @ (pred - pred.mean())) / denom
    return FitLine(slope=slope, intercept=float(pred.mean() - slope * target.mean()))


@dataclass
class EvaluationResult:
    metrics: dict[str, MetricsReport]          # "train" / "test" / "all"
    histogram: ErrorHistogram
    scatter: list[tuple[float, float, str]]    # (target, prediction, split)
    fit_lines: dict[str, FitLine] = field(default_factory=dict)


def evaluate(model, train: Dataset, test: Dataset, bins: int = 20) -> EvaluationResult:
    """Metrics per split and pooled, a shared-edge error histogram, and a
    plot-ready scatter. ``model`` is anything with ``predict(X) -> y``."""
    pred_tr = model.predict(train.inputs)
    pred_te = model.predict(test.inputs)
    y_tr, y_te = train.targets, test.targets
    y_all = np.concatenate([y_tr, y_te])
    pred_all = np.concatenate([pred_tr, pred_te])

    result_metrics = {
        "train": metrics(pred_tr, y_tr),
        "test": metrics(pred_te, y_te),
        "all": metrics(pred_all, y_all),
    }
    hist = pooled_histogram(
        {"train": pred_tr - y_tr, "test": pred_te - y_te}, bins=bins
    )
    scatter = (
        [(float(t), float(p), "train") for t, p in zip(y_tr, pred_tr)]
        + [(float(t), float(p), "test") for t, p in zip(y_te, pred_te)]
    )
    lines = {
        "train": fit_line(y_tr, pred_tr),
        "test": fit_line(y_te, pred_te),
        "all": fit_line(y_all, pred_all),
    }
    return EvaluationResult(metrics=result_metrics, histogram=hist,
                            scatter=scatter, fit_lines=lines)


# --- file exports ------------------------------------------------------------

def write_metrics_json(result: EvaluationResult, path: str | Path) -> Path:
    path = Path(path)
    doc = {split: rep.to_dict() for split, rep in result.metrics.items()}
    doc["fit_lines"] = {
        split: {"slope": line.slope, "intercept": line.intercept}
        for split, line in result.fit_lines.items()
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def write_histogram_csv(hist: ErrorHistogram, path: str | Path) -> Path:
    path = Path(path)
    tags = sorted(hist.counts)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("bin_left,bin_right," + ",".join(f"count_{t}" for t in tags) + "\n")
        for b in range(hist.n_bins):
            row = [repr(float(hist.bin_edges[b])), repr(float(hist.bin_edges[b + 1]))]
            row += [str(int(hist.counts[t][b])) for t in tags]
            fh.write(",".join(row) + "\n")
    return path


def write_scatter_csv(result: EvaluationResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("target,prediction,split\n")
        for target, prediction, split in result.scatter:
            fh.write(f"{target!r},{prediction!r},{split}\n")
    return path


def format_mse_r_table(rows: Mapping[str, MetricsReport], title: str) -> str:
    """Comparison table, one row per algorithm: MSE and R."""
    lines = [title, f"{'Training algorithm':<26} {'MSE':>12} {'R':>10}"]
    for name, rep in rows.items():
        lines.append(f"{name:<26} {rep.mse:>12.3e} {rep.r:>10.6f}")
    return "\n".join(lines) + "\n"


def format_five_metric_table(rows: Mapping[str, MetricsReport], title: str) -> str:
    """Comparison table with the five headline regression metrics."""
    header = (f"{'Regression technique':<22} {'Corr coef':>10} {'MAE':>10} "
              f"{'RMSE':>10} {'RAE %':>10} {'RRSE %':>10}")
    lines = [title, header]
    for name, rep in rows.items():
        rae = f"{rep.rae_percent:.4f}" if rep.rae_percent is not None else "n/a"
        rrse = f"{rep.rrse_percent:.4f}" if rep.rrse_percent is not None else "n/a"
        lines.append(f"{name:<22} {rep.r:>10.4f} {rep.mae:>10.4f} "
                     f"{rep.rmse:>10.4f} {rae:>10} {rrse:>10}")
    return "\n".join(lines) + "\n"
