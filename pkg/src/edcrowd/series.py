"""Domain model for hourly ED occupancy series and daily crowding labels.

An occupancy ratio (EDOR) is occupied beds divided by capacity for one
operational section, sampled hourly; values above 1.0 are legal. A day is
"crowded" for a section when the ratio reaches the configured threshold for
at least ``min_hours`` of its 24 hours.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

HOUR = timedelta(hours=1)
DAY_HOURS = 24


class Section(Enum):
    """Operational section of the emergency department."""

    BEDOCCUPYING = "bed"
    MEDICAL = "med"
    SURGICAL = "sur"
    CRITICAL = "cri"


#: Fixed section ordering used for feature blocks and subgroup codes.
SECTION_ORDER: tuple[Section, ...] = (
    Section.BEDOCCUPYING,
    Section.MEDICAL,
    Section.SURGICAL,
    Section.CRITICAL,
)

#: Sections that are forecast targets. Critical is an explanatory series only.
TARGET_SECTIONS: tuple[Section, ...] = (
    Section.BEDOCCUPYING,
    Section.MEDICAL,
    Section.SURGICAL,
)


@dataclass(frozen=True)
class CrowdingConfig:
    """Threshold definition of a crowded hour / crowded day.

    An hour is crowded when the occupancy ratio is at or above
    ``edor_threshold`` (inclusive); a day is crowded when at least
    ``min_hours`` of its hours are crowded.
    """

    edor_threshold: float = 0.90
    min_hours: int = 3

    def __post_init__(self) -> None:
        if not self.edor_threshold > 0:
            raise ValueError("edor_threshold must be positive")
        if not 1 <= self.min_hours <= DAY_HOURS:
            raise ValueError("min_hours must be in [1, 24]")


@dataclass(frozen=True)
class DayLabel:
    """Crowding outcome of one calendar day for one section."""

    date: date
    section: Section
    crowded: bool
    crowded_hour_count: int


@dataclass(frozen=True)
class HourlySeries:
    """Contiguous hourly occupancy ratios for one section.

    ``start`` is the (local, naive) timestamp of the first sample and must be
    hour-aligned; sample ``i`` covers the hour starting at ``start + i h``.
    Values are non-negative and may exceed 1.0.
    """

    section: Section
    start: datetime
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("empty series")
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains non-finite values")
        if np.any(values < 0):
            raise ValueError("series contains negative occupancy ratios")
        if (self.start.minute, self.start.second, self.start.microsecond) != (0, 0, 0):
            raise ValueError("series start must be hour-aligned")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end_exclusive(self) -> datetime:
        return self.start + len(self) * HOUR

    def index_at(self, ts: datetime) -> int:
        """Sample index of the hour starting at ``ts`` (may be out of range)."""
        delta = ts - self.start
        seconds = delta.days * 86400 + delta.seconds
        if delta.microseconds or seconds % 3600:
            raise ValueError(f"timestamp {ts} is not on the hourly grid")
        return seconds // 3600

    def value_at(self, ts: datetime) -> float:
        i = self.index_at(ts)
        if not 0 <= i < len(self):
            raise ValueError(f"timestamp {ts} outside series range")
        return float(self.values[i])

    def window_before(self, end_exclusive: datetime, n_hours: int) -> np.ndarray:
        """The ``n_hours`` samples covering [end - n_hours h, end - 1 h]."""
        stop = self.index_at(end_exclusive)
        start = stop - n_hours
        if start < 0:
            raise ValueError(
                f"warmup not satisfied: need {n_hours} hours before {end_exclusive}"
            )
        if stop > len(self):
            raise ValueError(f"series ends before {end_exclusive}")
        return self.values[start:stop]

    def day_series(self, day: date) -> "HourlySeries":
        """Sub-series holding the 24 hours of one calendar day."""
        midnight = datetime(day.year, day.month, day.day)
        start = self.index_at(midnight)
        if start < 0 or start + DAY_HOURS > len(self):
            raise ValueError(f"incomplete day: {day} not fully covered")
        return HourlySeries(self.section, midnight, self.values[start : start + DAY_HOURS])


def hourly_crowding(series: HourlySeries, cfg: CrowdingConfig) -> np.ndarray:
    """Boolean flag per hour: occupancy ratio at or above the threshold."""
    if len(series) == 0:
        raise ValueError("empty series")
    return series.values >= cfg.edor_threshold


def label_day(series_for_day: HourlySeries, cfg: CrowdingConfig) -> DayLabel:
    """Label one calendar day from its 24 hourly samples.

    The crowded-hour count is taken over the full day; the day is crowded
    when the count reaches ``cfg.min_hours``.
    """
    if len(series_for_day) != DAY_HOURS:
        raise ValueError(
            f"incomplete day: expected {DAY_HOURS} hourly values, got {len(series_for_day)}"
        )
    if series_for_day.start.hour != 0:
        raise ValueError("incomplete day: series must start at midnight")
    count = int(np.count_nonzero(hourly_crowding(series_for_day, cfg)))
    return DayLabel(
        date=series_for_day.start.date(),
        section=series_for_day.section,
        crowded=count >= cfg.min_hours,
        crowded_hour_count=count,
    )


def daily_prevalence(labels: Iterable[DayLabel]) -> dict[Section, float]:
    """Fraction of crowded days per section."""
    totals: dict[Section, int] = {}
    crowded: dict[Section, int] = {}
    for label in labels:
        totals[label.section] = totals.get(label.section, 0) + 1
        crowded[label.section] = crowded.get(label.section, 0) + int(label.crowded)
    if not totals:
        raise ValueError("no labels given")
    return {s: crowded[s] / totals[s] for s in totals}


def label_days(
    series: Mapping[Section, HourlySeries],
    days: Sequence[date],
    cfg: CrowdingConfig,
) -> dict[Section, list[DayLabel]]:
    """Label a run of days for every section present in ``series``."""
    return {
        section: [label_day(s.day_series(d), cfg) for d in days]
        for section, s in series.items()
    }
