"""Deterministic synthetic-data generator for end-to-end verification.

Produces drinking timelines and walking-task inertial traces whose signal
statistics respond monotonically to the eBAC label: higher eBAC widens
stride-timing jitter on the vertical acceleration channel, grows a
lateral sway sinusoid, and grows a low-frequency attitude wobble. This is
a test oracle with a controllable label-to-signal relationship, not a
biomechanical gait model.

Everything derives from ``SynthConfig.seed`` through per-entity seed
sequences keyed by (subject, session, hour), so parallel and sequential
generation produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from . import ebac
from .ingest import (
    EmaTimeline,
    GaitRecording,
    SubjectProfile,
    write_ema,
    write_sensor_log,
)

# seed-stream discriminators
_STREAM_PROFILE = 1
_STREAM_TIMELINE = 2
_STREAM_RECORDING = 3

#: First session date; sessions alternate Friday/Saturday week by week.
_BASE_DATE = date(2024, 1, 5)


@dataclass(frozen=True)
class BacEffect:
    """Linear coefficients mapping eBAC (g/dl) to signal perturbations."""

    stride_jitter_sd: float = 0.6   # s of step-timing jitter per unit eBAC
    sway_amplitude: float = 3.0     # m/s^2 of lateral sway per unit eBAC
    wobble_amplitude: float = 1.2   # rad of attitude wobble per unit eBAC

    def __post_init__(self) -> None:
        if min(self.stride_jitter_sd, self.sway_amplitude, self.wobble_amplitude) < 0:
            raise ValueError("effect amplitudes must be >= 0")


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 10
    sessions_per_subject: int = 8
    seed: int = 0
    step_freq_hz: float = 1.8
    base_noise_sd: float = 0.05
    duration_s: float = 30.0
    sample_rate_hz: float = 100.0
    bac_effect: BacEffect = field(default_factory=BacEffect)
    p_female: float = 0.7
    p_drinking_session: float = 0.6
    mean_drinks: float = 3.6
    sd_drinks: float = 2.2
    max_drinks: int = 10
    ebac_cap: float = 0.25

    def __post_init__(self) -> None:
        if self.n_subjects < 1 or self.sessions_per_subject < 1:
            raise ValueError("need at least one subject and session")
        if self.base_noise_sd < 0:
            raise ValueError("base_noise_sd must be >= 0")


@dataclass(frozen=True)
class TruthRow:
    """Ground truth for one generated recording."""

    recording_id: str
    ebac: float
    jitter_sd: float
    sway_amplitude: float
    wobble_amplitude: float


@dataclass
class SynthDataset:
    profiles: list[SubjectProfile]
    timelines: list[tuple[SubjectProfile, EmaTimeline]]
    recordings: list[GaitRecording]
    truth: list[TruthRow]


def _rng(cfg: SynthConfig, stream: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((cfg.seed, stream, *key)))


def subject_id(index: int) -> str:
    return f"s{index + 1:02d}"


def session_date(index: int) -> str:
    d = _BASE_DATE + timedelta(weeks=index // 2, days=index % 2)
    return d.isoformat()


def gen_profile(cfg: SynthConfig, subject: int) -> SubjectProfile:
    """Subject constants; weight ~ Normal(179, 35) truncated positive."""
    rng = _rng(cfg, _STREAM_PROFILE, subject)
    female = rng.random() < cfg.p_female
    weight = float(rng.normal(179.0, 35.0))
    while weight <= 0:
        weight = float(rng.normal(179.0, 35.0))
    return SubjectProfile(
        subject_id=subject_id(subject),
        gender_constant=9.0 if female else 7.5,
        weight=weight,
    )


def gen_timeline(cfg: SynthConfig, subject: int,
                 session: int = 0) -> tuple[SubjectProfile, EmaTimeline]:
    """One evening of hourly drink reports for one subject.

    A session is dry with probability 1 - p_drinking_session; otherwise
    the total drink count is a truncated normal spread over consecutive
    hours starting somewhere in the early schedule. Drinks are trimmed
    until the induced eBAC trace stays at or below the configured cap.
    """
    profile = gen_profile(cfg, subject)
    rng = _rng(cfg, _STREAM_TIMELINE, subject, session)
    timeline = EmaTimeline(profile.subject_id, session_date(session))
    hours = list(ebac.HOUR_SLOTS)
    drinks = {h: 0 for h in hours}

    if rng.random() < cfg.p_drinking_session:
        total = int(round(float(rng.normal(cfg.mean_drinks, cfg.sd_drinks))))
        total = min(max(total, 1), cfg.max_drinks)
        start = int(rng.integers(0, 3))  # episode starts 8pm-10pm
        active = hours[start:]
        # front-loaded split of the total across the active hours
        weights = np.array([0.45, 0.3, 0.15, 0.1, 0.05][:len(active)])
        counts = rng.multinomial(total, weights / weights.sum())
        for h, c in zip(active, counts):
            drinks[h] = int(c)
        _trim_to_cap(drinks, profile, cfg)

    for h in hours:
        timeline.add(h, drinks[h])
    return profile, timeline


def _trim_to_cap(drinks: dict[int, int], profile: SubjectProfile,
                 cfg: SynthConfig) -> None:
    """Remove drinks from the heaviest hour until the trace peak <= cap."""
    while True:
        tl = EmaTimeline(profile.subject_id, "1970-01-01", dict(drinks))
        trace = ebac.ebac_timeline(tl, profile)
        if max(trace.values.values()) <= cfg.ebac_cap or sum(drinks.values()) == 0:
            return
        heaviest = max(drinks, key=lambda h: (drinks[h], h))
        drinks[heaviest] -= 1


def gen_recording(profile: SubjectProfile, ebac_value: float, cfg: SynthConfig,
                  rng: np.random.Generator, *, session_date: str,
                  hour_slot: int) -> GaitRecording:
    """Synthesize one 30 s walking-task trace at the given eBAC.

    Vertical acceleration is a train of step impulses whose timing jitter
    grows with eBAC; the lateral channel gains an eBAC-scaled sway
    sinusoid; attitude channels gain an eBAC-scaled low-frequency wobble.
    Gaussian noise of sd ``base_noise_sd`` is added throughout.
    """
    if ebac_value < 0:
        raise ValueError("ebac must be >= 0")
    eff = cfg.bac_effect
    n = int(round(cfg.duration_s * cfg.sample_rate_hz))
    t = np.arange(n) / cfg.sample_rate_hz

    jitter_sd = eff.stride_jitter_sd * ebac_value
    sway_amp = eff.sway_amplitude * ebac_value
    wobble_amp = eff.wobble_amplitude * ebac_value

    # step impulse train with jittered timing on the vertical axis
    n_steps = int(cfg.duration_s * cfg.step_freq_hz) + 1
    step_times = np.arange(n_steps) / cfg.step_freq_hz
    step_times = step_times + rng.normal(0.0, jitter_sd, size=n_steps)
    pulse_width = 0.06  # s
    vertical = np.zeros(n)
    for st in step_times:
        vertical += 1.5 * np.exp(-0.5 * ((t - st) / pulse_width) ** 2)

    forward = 0.4 * np.sin(2.0 * np.pi * cfg.step_freq_hz * t)
    sway_phase = rng.uniform(0.0, 2.0 * np.pi)
    lateral = sway_amp * np.sin(2.0 * np.pi * (cfg.step_freq_hz / 3.0) * t + sway_phase)

    wobble_freq = 0.4  # Hz
    phases = rng.uniform(0.0, 2.0 * np.pi, size=3)
    attitude_base = 0.1 * np.sin(2.0 * np.pi * cfg.step_freq_hz * t)[:, None]
    wobble = wobble_amp * np.sin(
        2.0 * np.pi * wobble_freq * t[:, None] + phases[None, :]
    )

    lin_acc = np.stack([forward, lateral, vertical], axis=1)
    lin_acc = lin_acc + rng.normal(0.0, cfg.base_noise_sd, size=(n, 3))
    attitude = attitude_base + wobble + rng.normal(0.0, cfg.base_noise_sd, size=(n, 3))

    return GaitRecording(
        subject_id=profile.subject_id,
        session_date=session_date,
        hour_slot=hour_slot,
        sample_rate_hz=cfg.sample_rate_hz,
        t=t,
        lin_acc=lin_acc,
        attitude=attitude,
    )


def generate_dataset(cfg: SynthConfig) -> SynthDataset:
    """All profiles, timelines, recordings, and truth rows for a config."""
    profiles: list[SubjectProfile] = []
    pairs: list[tuple[SubjectProfile, EmaTimeline]] = []
    recordings: list[GaitRecording] = []
    truth: list[TruthRow] = []
    eff = cfg.bac_effect

    for subj in range(cfg.n_subjects):
        profile = gen_profile(cfg, subj)
        profiles.append(profile)
        for sess in range(cfg.sessions_per_subject):
            _, timeline = gen_timeline(cfg, subj, sess)
            pairs.append((profile, timeline))
            trace = ebac.ebac_timeline(timeline, profile)
            for hour in ebac.HOUR_SLOTS:
                label = trace.values[hour]
                rng = _rng(cfg, _STREAM_RECORDING, subj, sess, hour)
                rec = gen_recording(profile, label, cfg, rng,
                                    session_date=timeline.session_date,
                                    hour_slot=hour)
                recordings.append(rec)
                truth.append(TruthRow(
                    recording_id=rec.recording_id,
                    ebac=label,
                    jitter_sd=eff.stride_jitter_sd * label,
                    sway_amplitude=eff.sway_amplitude * label,
                    wobble_amplitude=eff.wobble_amplitude * label,
                ))
    return SynthDataset(profiles=profiles, timelines=pairs,
                        recordings=recordings, truth=truth)


def write_dataset(data: SynthDataset, out_dir: str | Path) -> dict[str, Path]:
    """Write sensor CSVs, the EMA JSON, and truth.csv in ingest formats."""
    out_dir = Path(out_dir)
    sensors = out_dir / "sensors"
    for rec in data.recordings:
        write_sensor_log(rec, sensors)
    ema_path = write_ema(data.timelines, out_dir / "ema.json")
    truth_path = out_dir / "truth.csv"
    with truth_path.open("w", newline="") as fh:
        fh.write("recording_id,ebac,jitter_sd,sway_amplitude,wobble_amplitude\n")
        for row in data.truth:
            fh.write(f"{row.recording_id},{row.ebac!r},{row.jitter_sd!r},"
                     f"{row.sway_amplitude!r},{row.wobble_amplitude!r}\n")
    return {"sensors": sensors, "ema": ema_path, "truth": truth_path}


def config_to_dict(cfg: SynthConfig) -> dict:
    d = {k: getattr(cfg, k) for k in (
        "n_subjects", "sessions_per_subject", "seed", "step_freq_hz",
        "base_noise_sd", "duration_s", "sample_rate_hz", "p_female",
        "p_drinking_session", "mean_drinks", "sd_drinks", "max_drinks",
        "ebac_cap",
    )}
    d["bac_effect"] = {
        "stride_jitter_sd": cfg.bac_effect.stride_jitter_sd,
        "sway_amplitude": cfg.bac_effect.sway_amplitude,
        "wobble_amplitude": cfg.bac_effect.wobble_amplitude,
    }
    return d


def config_from_dict(doc: dict) -> SynthConfig:
    doc = dict(doc)
    eff = doc.pop("bac_effect", None)
    if eff is not None:
        doc["bac_effect"] = BacEffect(**eff)
    return SynthConfig(**doc)
