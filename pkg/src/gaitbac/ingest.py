"""Domain data model and parsers for sensor logs and hourly drink reports.

Sensor logs are CSV files, one per walking-task recording, with header
``t,lax,lay,laz,roll,pitch,yaw``: time in seconds, gravity-removed linear
acceleration in m/s^2, and device attitude as Euler angles in radians.
Drink reports are a JSON array of per-subject-per-evening records. Parsing
is pure given file contents; all types are treated as immutable after
construction.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from . import ebac
from .errors import (
    DuplicateHourSlot,
    EmptyRecording,
    InvalidGenderConstant,
    MalformedRow,
    NonMonotonicTime,
    SchemaViolation,
)

SENSOR_HEADER = ["t", "lax", "lay", "laz", "roll", "pitch", "yaw"]

#: Gender constant of the drink-to-eBAC formula, per reported gender.
GENDER_CONSTANTS = {"female": 9.0, "male": 7.5}

MAX_DRINKS_PER_HOUR = 30
MAX_RECORDING_SECONDS = 60.0

#: Accepted median inter-sample gap, seconds (50-200 Hz around the
#: nominal 100 Hz). Recordings outside are kept but flagged.
SAMPLE_GAP_TOLERANCE = (0.005, 0.020)

FLAG_SAMPLE_RATE = "sample_rate_out_of_tolerance"
FLAG_HOUR_SLOT = "hour_outside_schedule"


@dataclass(frozen=True)
class SubjectProfile:
    """Per-subject constants entering the eBAC formula."""

    subject_id: str
    gender_constant: float  # 9.0 for women, 7.5 for men
    weight: float           # pounds

    def __post_init__(self) -> None:
        if self.gender_constant not in (9.0, 7.5):
            raise InvalidGenderConstant(
                f"gender constant must be 9.0 or 7.5, got {self.gender_constant!r}"
            )
        if not (math.isfinite(self.weight) and self.weight > 0):
            raise SchemaViolation(f"weight must be positive, got {self.weight!r}")


class ImuSample(NamedTuple):
    """One fused inertial sample: time plus two 3-axis channels."""

    t: float
    lin_acc: tuple[float, float, float]
    attitude: tuple[float, float, float]


@dataclass
class GaitRecording:
    """One walking-task trace. Channel data is held in float64 arrays:
    ``t`` (n,), ``lin_acc`` (n, 3) and ``attitude`` (n, 3)."""

    subject_id: str
    session_date: str
    hour_slot: int
    sample_rate_hz: float
    t: np.ndarray
    lin_acc: np.ndarray
    attitude: np.ndarray
    flags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=np.float64)
        self.lin_acc = np.asarray(self.lin_acc, dtype=np.float64)
        self.attitude = np.asarray(self.attitude, dtype=np.float64)
        n = self.t.shape[0]
        if n == 0:
            raise EmptyRecording(f"{self._key()} has no samples")
        if self.lin_acc.shape != (n, 3) or self.attitude.shape != (n, 3):
            raise ValueError("channel arrays must be (n, 3) matching t")
        if not (np.all(np.isfinite(self.t))
                and np.all(np.isfinite(self.lin_acc))
                and np.all(np.isfinite(self.attitude))):
            raise ValueError(f"{self._key()} contains non-finite values")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise NonMonotonicTime(f"{self._key()} timestamps not strictly increasing")
        if self.duration_s > MAX_RECORDING_SECONDS:
            raise ValueError(f"{self._key()} longer than {MAX_RECORDING_SECONDS} s")

    def _key(self) -> str:
        return f"{self.subject_id}_{self.session_date}_{self.hour_slot}"

    @property
    def recording_id(self) -> str:
        return self._key()

    @property
    def n_samples(self) -> int:
        return int(self.t.shape[0])

    @property
    def duration_s(self) -> float:
        return float(self.t[-1] - self.t[0])

    def samples(self) -> list[ImuSample]:
        """Materialize rows as ImuSample tuples (test/debug convenience)."""
        return [
            ImuSample(float(self.t[i]), tuple(self.lin_acc[i]), tuple(self.attitude[i]))
            for i in range(self.n_samples)
        ]

    @classmethod
    def from_samples(cls, subject_id: str, session_date: str, hour_slot: int,
                     sample_rate_hz: float, samples: Iterable[ImuSample],
                     flags: frozenset[str] = frozenset()) -> "GaitRecording":
        rows = list(samples)
        return cls(
            subject_id=subject_id,
            session_date=session_date,
            hour_slot=hour_slot,
            sample_rate_hz=sample_rate_hz,
            t=np.array([s.t for s in rows], dtype=np.float64),
            lin_acc=np.array([s.lin_acc for s in rows], dtype=np.float64).reshape(-1, 3),
            attitude=np.array([s.attitude for s in rows], dtype=np.float64).reshape(-1, 3),
            flags=flags,
        )


@dataclass(frozen=True)
class EmaReport:
    """One hourly drink self-report."""

    subject_id: str
    session_date: str
    hour_slot: int
    drinks: int

    def __post_init__(self) -> None:
        if not (0 <= self.drinks <= MAX_DRINKS_PER_HOUR):
            raise SchemaViolation(
                f"drinks must be in [0, {MAX_DRINKS_PER_HOUR}], got {self.drinks}"
            )


@dataclass
class EmaTimeline:
    """All drink reports of one subject over one evening session."""

    subject_id: str
    session_date: str
    reports: dict[int, int] = field(default_factory=dict)

    def add(self, hour_slot: int, drinks: int) -> None:
        if hour_slot in self.reports:
            raise DuplicateHourSlot(
                f"{self.subject_id} {self.session_date}: two reports for hour {hour_slot}"
            )
        # route range validation through EmaReport
        EmaReport(self.subject_id, self.session_date, hour_slot, drinks)
        self.reports[hour_slot] = drinks


@dataclass(frozen=True)
class LabeledRecording:
    """A recording paired with its eBAC label in g/dl."""

    recording: GaitRecording
    label: float


@dataclass
class AlignResult:
    labeled: list[LabeledRecording]
    dropped: list[str]  # recording ids with no matching timeline

    @property
    def n_dropped(self) -> int:
        return len(self.dropped)


# --- sensor log CSV -------------------------------------------------------

def parse_sensor_log(path: str | Path) -> GaitRecording:
    """Parse one sensor-log CSV into a validated GaitRecording.

    The file name must follow ``<subject>_<date>_<hour>.csv``. Rows with a
    bad column count or a non-numeric/non-finite cell raise MalformedRow
    naming the offending line.
    """
    path = Path(path)
    subject_id, session_date, hour_slot = _parse_sensor_filename(path)

    t: list[float] = []
    acc: list[tuple[float, float, float]] = []
    att: list[tuple[float, float, float]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or (row[0].startswith("#")):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if header != SENSOR_HEADER:
                    raise MalformedRow(
                        f"{path}:{lineno}: expected header {','.join(SENSOR_HEADER)}"
                    )
                continue
            if len(row) != 7:
                raise MalformedRow(f"{path}:{lineno}: expected 7 columns, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
            if not all(math.isfinite(v) for v in vals):
                raise MalformedRow(f"{path}:{lineno}: non-finite value")
            t.append(vals[0])
            acc.append((vals[1], vals[2], vals[3]))
            att.append((vals[4], vals[5], vals[6]))
    if header is None or not t:
        raise EmptyRecording(f"{path}: no data rows")

    ts = np.asarray(t)
    if ts.shape[0] > 1 and not np.all(np.diff(ts) > 0):
        bad = int(np.flatnonzero(np.diff(ts) <= 0)[0])
        # +2 header line, +1 one-based
        raise NonMonotonicTime(f"{path}: time not strictly increasing at data row {bad + 2}")

    flags = set()
    if ts.shape[0] > 1:
        median_gap = float(np.median(np.diff(ts)))
        rate = 1.0 / median_gap
        if not (SAMPLE_GAP_TOLERANCE[0] <= median_gap <= SAMPLE_GAP_TOLERANCE[1]):
            flags.add(FLAG_SAMPLE_RATE)
    else:
        rate = 0.0
    if not (20 <= hour_slot <= 24):
        flags.add(FLAG_HOUR_SLOT)

    return GaitRecording(
        subject_id=subject_id,
        session_date=session_date,
        hour_slot=hour_slot,
        sample_rate_hz=rate,
        t=ts,
        lin_acc=np.asarray(acc),
        attitude=np.asarray(att),
        flags=frozenset(flags),
    )


def _parse_sensor_filename(path: Path) -> tuple[str, str, int]:
    parts = path.stem.rsplit("_", 2)
    if len(parts) != 3:
        raise SchemaViolation(
            f"{path.name}: file name must follow <subject>_<date>_<hour>.csv"
        )
    subject_id, session_date, hour_str = parts
    try:
        date.fromisoformat(session_date)
        hour_slot = int(hour_str)
    except ValueError as exc:
        raise SchemaViolation(f"{path.name}: {exc}") from exc
    return subject_id, session_date, hour_slot


def write_sensor_log(rec: GaitRecording, directory: str | Path) -> Path:
    """Write a recording in the sensor-log CSV format; returns the path.

    Floats are written with shortest round-trip precision so that
    ``parse_sensor_log(write_sensor_log(rec))`` reproduces the arrays
    bit for bit.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{rec.recording_id}.csv"
    with path.open("w", newline="") as fh:
        fh.write(",".join(SENSOR_HEADER) + "\n")
        for i in range(rec.n_samples):
            row = (rec.t[i], *rec.lin_acc[i], *rec.attitude[i])
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def scan_sensor_dir(directory: str | Path) -> list[GaitRecording]:
    """Parse every ``*.csv`` in a directory, sorted by file name."""
    return [parse_sensor_log(p) for p in sorted(Path(directory).glob("*.csv"))]


# --- EMA JSON --------------------------------------------------------------

def parse_ema(path: str | Path) -> list[tuple[SubjectProfile, EmaTimeline]]:
    """Parse an EMA JSON file into (profile, timeline) pairs.

    One timeline per (subject, session date); profiles are deduplicated, so
    the same SubjectProfile object is shared by all of a subject's
    timelines.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON: {exc}") from exc
    return _build_ema(doc, str(path))


def parse_ema_many(paths: Iterable[str | Path]) -> list[tuple[SubjectProfile, EmaTimeline]]:
    """Parse and merge several EMA files (profiles deduplicated across files)."""
    docs = []
    for p in paths:
        p = Path(p)
        try:
            part = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"{p}: invalid JSON: {exc}") from exc
        if not isinstance(part, list):
            raise SchemaViolation(f"{p}: top-level value must be an array")
        docs.extend(part)
    return _build_ema(docs, "merged input")


def _build_ema(doc: object, source: str) -> list[tuple[SubjectProfile, EmaTimeline]]:
    if not isinstance(doc, list):
        raise SchemaViolation(f"{source}: top-level value must be an array")
    profiles: dict[str, SubjectProfile] = {}
    timelines: dict[tuple[str, str], EmaTimeline] = {}
    for idx, rec in enumerate(doc):
        if not isinstance(rec, dict):
            raise SchemaViolation(f"{source}: record {idx} is not an object")
        try:
            subject_id = str(rec["subject_id"])
            gender = rec["gender"]
            weight = float(rec["weight_lb"])
            session_date = str(rec["session_date"])
            reports = rec["reports"]
        except KeyError as exc:
            raise SchemaViolation(f"{source}: record {idx} missing key {exc}") from exc
        if gender not in GENDER_CONSTANTS:
            raise InvalidGenderConstant(
                f"{source}: record {idx}: gender must be 'female' or 'male', got {gender!r}"
            )
        try:
            date.fromisoformat(session_date)
        except ValueError as exc:
            raise SchemaViolation(f"{source}: record {idx}: {exc}") from exc
        profile = SubjectProfile(subject_id, GENDER_CONSTANTS[gender], weight)
        seen = profiles.get(subject_id)
        if seen is None:
            profiles[subject_id] = profile
        elif (seen.gender_constant, seen.weight) != (profile.gender_constant, profile.weight):
            raise SchemaViolation(f"{source}: conflicting profiles for subject {subject_id}")

        timeline = timelines.setdefault(
            (subject_id, session_date), EmaTimeline(subject_id, session_date)
        )
        if not isinstance(reports, list):
            raise SchemaViolation(f"{source}: record {idx}: reports must be an array")
        for rep in reports:
            try:
                hour = int(rep["hour"])
                drinks = int(rep["drinks"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"{source}: record {idx}: bad report {rep!r}") from exc
            timeline.add(hour, drinks)

    return [
        (profiles[sid], timelines[(sid, d)])
        for (sid, d) in sorted(timelines)
    ]


def write_ema(pairs: list[tuple[SubjectProfile, EmaTimeline]], path: str | Path) -> Path:
    """Write (profile, timeline) pairs in the EMA JSON format."""
    path = Path(path)
    gender_by_const = {v: k for k, v in GENDER_CONSTANTS.items()}
    doc = []
    for profile, timeline in pairs:
        doc.append({
            "subject_id": profile.subject_id,
            "gender": gender_by_const[profile.gender_constant],
            "weight_lb": profile.weight,
            "session_date": timeline.session_date,
            "reports": [
                {"hour": h, "drinks": timeline.reports[h]}
                for h in sorted(timeline.reports)
            ],
        })
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


# --- label alignment --------------------------------------------------------

def align(recordings: Iterable[GaitRecording],
          ema: Iterable[tuple[SubjectProfile, EmaTimeline]],
          params: ebac.EbacParams | None = None) -> AlignResult:
    """Pair each recording with the eBAC at its hour slot.

    Recordings whose (subject, session date) has no timeline are dropped
    and listed in the result rather than raising. Output is sorted by
    (subject, date, hour) so it does not depend on input file order.
    """
    by_key = {(t.subject_id, t.session_date): (p, t) for p, t in ema}
    labeled: list[LabeledRecording] = []
    dropped: list[str] = []
    for rec in recordings:
        entry = by_key.get((rec.subject_id, rec.session_date))
        if entry is None:
            dropped.append(rec.recording_id)
            continue
        profile, timeline = entry
        label = ebac.ebac_at_hour(timeline, profile, rec.hour_slot, params)
        labeled.append(LabeledRecording(rec, label))
    labeled.sort(key=lambda lr: (lr.recording.subject_id,
                                 lr.recording.session_date,
                                 lr.recording.hour_slot))
    dropped.sort()
    return AlignResult(labeled, dropped)
