"""Estimated blood alcohol content from hourly drink self-reports.

Uses the Matthews-Miller estimate: each standard drink contributes
``(1/drink_divisor) * gender_constant / weight`` g/dl, and alcohol clears
at a fixed hourly rate. The per-evening trace feeds cumulative drinks
since the start of the drinking episode into the instantaneous formula,
treating missing hourly reports as zero drinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import NonFiniteInput

if TYPE_CHECKING:  # pragma: no cover
    from .ingest import EmaTimeline, SubjectProfile

#: Scheduled report hours, 8pm through midnight on the local clock.
HOUR_SLOTS = tuple(range(20, 25))

DEFAULT_BETA60 = 0.017       # g/dl cleared per hour
DEFAULT_DRINK_DIVISOR = 2.0


@dataclass(frozen=True)
class EbacParams:
    """Constants of the eBAC formula."""

    beta60: float = DEFAULT_BETA60
    drink_divisor: float = DEFAULT_DRINK_DIVISOR

    def __post_init__(self) -> None:
        if not (self.beta60 > 0 and self.drink_divisor > 0):
            raise ValueError("beta60 and drink_divisor must be positive")


@dataclass
class EbacTrace:
    """Per-hour eBAC values (g/dl) for one subject-evening.

    ``drinking_start`` is the first hour with a nonzero report, or None
    for a dry evening.
    """

    values: dict[int, float]
    drinking_start: int | None = None

    def at_hour(self, hour_slot: int) -> float:
        return self.values[hour_slot]


def ebac_instant(c: float, profile: "SubjectProfile", t: float,
                 params: EbacParams | None = None) -> float:
    """eBAC after ``c`` cumulative standard drinks and ``t`` hours drinking.

    Returns ``max(0, (c / drink_divisor) * (GC / weight) - beta60 * t)``;
    clamped so clearance never drives the estimate negative.
    """
    params = params or EbacParams()
    gc, weight = profile.gender_constant, profile.weight
    if not all(math.isfinite(v) for v in (c, t, gc, weight)):
        raise NonFiniteInput(f"non-finite eBAC input: c={c}, t={t}, GC={gc}, weight={weight}")
    if c < 0 or t < 0:
        raise ValueError("drink count and elapsed hours must be non-negative")
    raw = (c / params.drink_divisor) * (gc / weight) - params.beta60 * t
    return max(0.0, raw)


def ebac_timeline(timeline: "EmaTimeline", profile: "SubjectProfile",
                  params: EbacParams | None = None,
                  hours: tuple[int, ...] | None = None) -> EbacTrace:
    """Evaluate the eBAC trace over an evening of hourly reports.

    Walks hour slots in ascending order (by default the scheduled 20-24
    range, widened to cover any stray report hours). At each hour the
    cumulative drinks since the episode start are fed to ``ebac_instant``
    with ``t`` = hours since that start; hours without a report contribute
    zero drinks. Once the clamped value reaches zero with no new drinks,
    the episode ends and a later report starts a fresh one.
    """
    params = params or EbacParams()
    if hours is None:
        hours = _hour_span(timeline.reports.keys())

    values: dict[int, float] = {}
    start: int | None = None
    first_start: int | None = None
    cum = 0
    for h in hours:
        drinks = timeline.reports.get(h, 0)
        if start is None:
            if drinks > 0:
                start = h
                cum = drinks
                value = ebac_instant(cum, profile, 0.0, params)
            else:
                value = 0.0
        else:
            cum += drinks
            value = ebac_instant(cum, profile, float(h - start), params)
            if value == 0.0 and drinks == 0:
                start = None
                cum = 0
        if first_start is None and start is not None:
            first_start = start
        values[h] = value
    return EbacTrace(values=values, drinking_start=first_start)


def ebac_at_hour(timeline: "EmaTimeline", profile: "SubjectProfile",
                 hour_slot: int, params: EbacParams | None = None) -> float:
    """eBAC at one hour slot, extending the trace to cover it if needed."""
    hours = _hour_span(set(timeline.reports.keys()) | {hour_slot})
    trace = ebac_timeline(timeline, profile, params, hours=hours)
    return trace.values[hour_slot]


def _hour_span(observed) -> tuple[int, ...]:
    lo = min([HOUR_SLOTS[0], *observed])
    hi = max([HOUR_SLOTS[-1], *observed])
    return tuple(range(lo, hi + 1))
