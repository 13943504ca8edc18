"""Sliding-window gait features: 24 values per window.

Each recording is cut into fixed-length windows (128 samples by default,
50% overlap). Per window and per sensor (linear acceleration, attitude)
four statistics are computed over the three axes: mean, population
standard deviation, spectral energy, and the pairwise Pearson correlations
between axes. Energy is the sum of squared DFT coefficient magnitudes
divided by the window length, which by Parseval equals the time-domain
sum of squares.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import TooShort

if TYPE_CHECKING:  # pragma: no cover
    from .ingest import GaitRecording

SENSORS = ("lin_acc", "attitude")
AXES = ("x", "y", "z")
AXIS_PAIRS = (("x", "y"), ("x", "z"), ("y", "z"))

#: Canonical feature order: for each sensor, mean/std/energy per axis then
#: the three pairwise axis correlations. 24 names total.
FEATURE_NAMES = tuple(
    f"{sensor}_{name}"
    for sensor in SENSORS
    for name in (
        *(f"mean_{a}" for a in AXES),
        *(f"std_{a}" for a in AXES),
        *(f"energy_{a}" for a in AXES),
        *(f"corr_{a}{b}" for a, b in AXIS_PAIRS),
    )
)

N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class WindowConfig:
    """Window length and hop in samples; ``include_dc`` keeps the DC term
    in the energy sum (both conventions appear in the literature)."""

    window_len: int = 128
    hop: int = 64
    include_dc: bool = True

    def __post_init__(self) -> None:
        if self.window_len < 2:
            raise ValueError("window_len must be >= 2")
        if not (1 <= self.hop <= self.window_len):
            raise ValueError("hop must be in [1, window_len]")


@dataclass
class FeatureVector:
    """One windowed gait descriptor plus its eBAC label."""

    values: np.ndarray
    label: float
    subject_id: str
    session_date: str
    hour_slot: int
    window_index: int

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} feature values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")
        if not (math.isfinite(self.label) and self.label >= 0):
            raise ValueError(f"label must be finite and >= 0, got {self.label!r}")


def window_mean(w: np.ndarray) -> float:
    """Arithmetic mean of one channel window."""
    w = np.asarray(w, dtype=np.float64)
    if w.size < 1:
        raise ValueError("window must be non-empty")
    return float(np.mean(w))


def window_std(w: np.ndarray) -> float:
    """Population standard deviation (divide by n, not n-1)."""
    w = np.asarray(w, dtype=np.float64)
    if w.size < 2:
        raise ValueError("window must have at least 2 samples")
    if w.min() == w.max():  # exactly constant: avoid 1-ulp mean rounding
        return 0.0
    dev = w - w.mean()
    return math.sqrt(float(dev @ dev) / w.size)


def window_corr(wa: np.ndarray, wb: np.ndarray) -> float:
    """Pearson correlation of two same-length windows.

    Defined as 0.0 when either window has zero variance.
    """
    wa = np.asarray(wa, dtype=np.float64)
    wb = np.asarray(wb, dtype=np.float64)
    if wa.shape != wb.shape or wa.size < 2:
        raise ValueError("windows must share a length of at least 2")
    if wa.min() == wa.max() or wb.min() == wb.max():
        return 0.0
    da = wa - wa.mean()
    db = wb - wb.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        return 0.0
    return float(da @ db) / denom


def window_energy(w: np.ndarray, include_dc: bool = True) -> float:
    """Normalized spectral energy: sum |DFT(w)_k|^2 / len(w).

    With the DC term included this equals the time-domain sum of squares
    (Parseval, unnormalized DFT).
    """
    w = np.asarray(w, dtype=np.float64)
    if w.size < 2:
        raise ValueError("window must have at least 2 samples")
    spectrum = np.fft.fft(w)
    if not include_dc:
        spectrum = spectrum[1:]
    return float(np.sum(np.abs(spectrum) ** 2) / w.size)


def window_starts(n_samples: int, cfg: WindowConfig) -> range:
    """Start indices of the full windows of an n-sample recording."""
    if n_samples < cfg.window_len:
        raise TooShort(f"{n_samples} samples < window of {cfg.window_len}")
    return range(0, n_samples - cfg.window_len + 1, cfg.hop)


def extract(rec: "GaitRecording", label: float,
            cfg: WindowConfig | None = None) -> list[FeatureVector]:
    """Cut a recording into windows and compute the 24 features per window.

    Windows start at 0, hop, 2*hop, ...; a final partial window is
    discarded. Every vector carries the recording's eBAC label. Raises
    TooShort when the recording is shorter than one window.
    """
    cfg = cfg or WindowConfig()
    starts = window_starts(rec.n_samples, cfg)
    out: list[FeatureVector] = []
    channels = {"lin_acc": rec.lin_acc, "attitude": rec.attitude}
    for wi, s in enumerate(starts):
        vals: list[float] = []
        for sensor in SENSORS:
            block = channels[sensor][s:s + cfg.window_len]  # (window_len, 3)
            cols = [block[:, k] for k in range(3)]
            vals.extend(window_mean(c) for c in cols)
            vals.extend(window_std(c) for c in cols)
            vals.extend(window_energy(c, cfg.include_dc) for c in cols)
            vals.append(window_corr(cols[0], cols[1]))
            vals.append(window_corr(cols[0], cols[2]))
            vals.append(window_corr(cols[1], cols[2]))
        out.append(FeatureVector(
            values=np.array(vals),
            label=label,
            subject_id=rec.subject_id,
            session_date=rec.session_date,
            hour_slot=rec.hour_slot,
            window_index=wi,
        ))
    return out


# --- feature CSV -----------------------------------------------------------

CSV_META_COLUMNS = ["subject_id", "session_date", "hour", "window_index"]


def write_features_csv(vectors: list[FeatureVector], path: str | Path,
                       config_echo: str | None = None) -> Path:
    """Write feature vectors as CSV: meta columns, f1..f24, label.

    A leading comment line documents the canonical name of each column;
    ``config_echo`` (JSON text) is echoed on a second comment line so the
    run can be replayed from the file alone.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        names = ",".join(f"f{i+1}={n}" for i, n in enumerate(FEATURE_NAMES))
        fh.write(f"# {names}\n")
        if config_echo is not None:
            fh.write(f"# config: {config_echo}\n")
        header = CSV_META_COLUMNS + [f"f{i+1}" for i in range(N_FEATURES)] + ["label"]
        fh.write(",".join(header) + "\n")
        for v in vectors:
            row = [v.subject_id, v.session_date, str(v.hour_slot), str(v.window_index)]
            row += [repr(float(x)) for x in v.values]
            row.append(repr(float(v.label)))
            fh.write(",".join(row) + "\n")
    return path


def read_features_csv(path: str | Path) -> list[FeatureVector]:
    """Read a feature CSV produced by write_features_csv."""
    path = Path(path)
    out: list[FeatureVector] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = row
                continue
            meta, rest = row[:4], row[4:]
            values = np.array([float(x) for x in rest[:N_FEATURES]])
            out.append(FeatureVector(
                values=values,
                label=float(rest[N_FEATURES]),
                subject_id=meta[0],
                session_date=meta[1],
                hour_slot=int(meta[2]),
                window_index=int(meta[3]),
            ))
    return out
