"""Per-day feature matrices for intraday crowding forecasts.

Each day yields 24 rows (4 sections x 6 forecast origins). A row holds, for
its origin hour, the trailing 168-hour occupancy and crowded-hour history of
all four sections, calendar fields, weekly occupancy lags of the target
section, daily weather, the section code, the day's crowding label and the
origin hour - 1365 columns in total. History windows end strictly before the
origin hour, so a row never sees data from its own forecast horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .series import (
    DAY_HOURS,
    SECTION_ORDER,
    TARGET_SECTIONS,
    CrowdingConfig,
    DayLabel,
    HourlySeries,
    Section,
    label_day,
)

#: Forecast origin hours (local time): a prediction issued at hour ``o`` may
#: use data strictly before ``o``.
ORIGIN_HOURS: tuple[int, ...] = (8, 9, 10, 11, 12, 13)

HISTORY_HOURS = 168
WEEKLY_LAGS = 8
CALENDAR_FIELDS = ("weekday", "day_of_month", "month", "is_holiday", "day_of_year")
WEATHER_FIELDS = ("precipitation", "snow_depth", "temp_max", "temp_min", "temp_mean")

#: Days of history needed before the first feature row can be built
#: (8 weekly lags outreach the 168-hour windows).
WARMUP_DAYS = WEEKLY_LAGS * 7


@dataclass(frozen=True)
class WeatherDay:
    """Daily weather summary joined onto every row of that day."""

    date: date
    precipitation: float
    snow_depth: float
    temp_max: float
    temp_min: float
    temp_mean: float

    def __post_init__(self) -> None:
        if self.precipitation < 0:
            raise ValueError("precipitation must be >= 0")
        if self.snow_depth < 0:
            raise ValueError("snow_depth must be >= 0")
        if not self.temp_min <= self.temp_mean <= self.temp_max:
            raise ValueError("temperatures must satisfy min <= mean <= max")

    def as_vector(self) -> tuple[float, ...]:
        return (self.precipitation, self.snow_depth, self.temp_max, self.temp_min, self.temp_mean)


class HolidayCalendar:
    """Set of public-holiday dates."""

    def __init__(self, dates: Iterable[date]):
        self._dates = frozenset(dates)

    def __contains__(self, day: date) -> bool:
        return day in self._dates

    def __len__(self) -> int:
        return len(self._dates)

    def __iter__(self):
        return iter(sorted(self._dates))

    def __eq__(self, other) -> bool:
        return isinstance(other, HolidayCalendar) and self._dates == other._dates


class FeatureLayout:
    """Named, contiguous column groups of the 1365-wide feature row.

    Group order: per-section occupancy history, calendar, per-section
    crowded-hour history, weekly lags, weather, subgroup code, crowding
    label, origin hour. The label column is carried in the matrix but is
    never model input; :meth:`model_columns` drops it.
    """

    def __init__(self, groups: Sequence[tuple[str, int]]):
        names = [g[0] for g in groups]
        if len(set(names)) != len(names):
            raise ValueError("duplicate group names")
        if any(size <= 0 for _, size in groups):
            raise ValueError("group sizes must be positive")
        self._groups: tuple[tuple[str, int], ...] = tuple(groups)
        starts: dict[str, int] = {}
        pos = 0
        for name, size in self._groups:
            starts[name] = pos
            pos += size
        self._starts = starts
        self._width = pos

    @classmethod
    def default(cls) -> "FeatureLayout":
        groups: list[tuple[str, int]] = []
        for s in SECTION_ORDER:
            groups.append((f"edor_history_{s.value}", HISTORY_HOURS))
        groups.append(("calendar", len(CALENDAR_FIELDS)))
        for s in SECTION_ORDER:
            groups.append((f"crowding_history_{s.value}", HISTORY_HOURS))
        groups.append(("weekly_lags", WEEKLY_LAGS))
        groups.append(("weather", len(WEATHER_FIELDS)))
        groups.append(("subgroup", 1))
        groups.append(("crowding_label", 1))
        groups.append(("origin", 1))
        return cls(groups)

    @property
    def width(self) -> int:
        return self._width

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self._groups)

    def span(self, name: str) -> slice:
        start = self._starts[name]
        size = dict(self._groups)[name]
        return slice(start, start + size)

    def col(self, name: str) -> int:
        span = self.span(name)
        if span.stop - span.start != 1:
            raise ValueError(f"group {name!r} is not a single column")
        return span.start

    def edor_history(self, section: Section) -> slice:
        return self.span(f"edor_history_{section.value}")

    def crowding_history(self, section: Section) -> slice:
        return self.span(f"crowding_history_{section.value}")

    @property
    def subgroup_col(self) -> int:
        return self.col("subgroup")

    @property
    def label_col(self) -> int:
        return self.col("crowding_label")

    @property
    def origin_col(self) -> int:
        return self.col("origin")

    def model_columns(self) -> np.ndarray:
        """Layout columns that are model input (everything but the label)."""
        return np.array([c for c in range(self.width) if c != self.label_col], dtype=np.intp)

    def model_width(self) -> int:
        return self.width - 1

    def model_group_columns(self) -> dict[str, np.ndarray]:
        """Model-space column indices per group, label group excluded.

        Model space is the layout with the label column removed, so layout
        columns after it shift down by one.
        """
        label = self.label_col
        out: dict[str, np.ndarray] = {}
        for name, _ in self._groups:
            if name == "crowding_label":
                continue
            span = self.span(name)
            cols = np.arange(span.start, span.stop, dtype=np.intp)
            cols = cols - (cols > label)
            out[name] = cols
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureLayout) and self._groups == other._groups


@dataclass(frozen=True)
class RowMeta:
    """Identity of one feature row."""

    section: Section
    origin_hour: int
    target_label: bool


@dataclass(frozen=True)
class DayMatrix:
    """All 24 feature rows of one day, plus per-row identity."""

    date: date
    rows: np.ndarray
    row_meta: tuple[RowMeta, ...]

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.row_meta):
            raise ValueError("rows and row_meta disagree")
        rows = self.rows.copy()
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)


def section_code(section: Section) -> int:
    return SECTION_ORDER.index(section)


def _weekly_lags(s: HourlySeries, origin_ts: datetime) -> list[float]:
    """Occupancy of the target section at the origin hour 1..8 weeks back."""
    lags = []
    for k in range(1, WEEKLY_LAGS + 1):
        ts = origin_ts - timedelta(hours=HISTORY_HOURS * k)
        idx = s.index_at(ts)
        if idx < 0:
            raise ValueError(
                f"warmup not satisfied: weekly lag {k} at {origin_ts} reaches before series start"
            )
        if idx >= len(s):
            raise ValueError(f"series ends before {ts}")
        lags.append(float(s.values[idx]))
    return lags


def _calendar_vector(day: date, holidays: HolidayCalendar) -> tuple[float, ...]:
    return (
        float(day.weekday()),
        float(day.day),
        float(day.month),
        float(day in holidays),
        float(day.timetuple().tm_yday),
    )


def build_day_matrix(
    day: date,
    series: Mapping[Section, HourlySeries],
    labels: Mapping[Section, DayLabel],
    weather: WeatherDay,
    holidays: HolidayCalendar,
    layout: FeatureLayout,
    cfg: CrowdingConfig,
) -> DayMatrix:
    """Build the 24-row feature matrix for one day.

    Raises ``ValueError`` ("warmup not satisfied") when any history window
    or weekly lag reaches before the start of a series, and ("missing
    covariate") when weather is absent or dated differently.
    """
    if weather is None or weather.date != day:
        raise ValueError(f"missing covariate: weather for {day}")
    for s in SECTION_ORDER:
        if s not in series:
            raise ValueError(f"missing series for section {s.value}")
        if s not in labels or labels[s].date != day:
            raise ValueError(f"missing label for section {s.value} on {day}")

    calendar = _calendar_vector(day, holidays)
    weather_vec = weather.as_vector()
    midnight = datetime(day.year, day.month, day.day)

    n_rows = len(SECTION_ORDER) * len(ORIGIN_HOURS)
    rows = np.empty((n_rows, layout.width), dtype=np.float64)
    meta: list[RowMeta] = []

    r = 0
    for origin in ORIGIN_HOURS:
        origin_ts = midnight + timedelta(hours=origin)
        # History blocks are shared by the four rows of this origin.
        shared = np.empty(layout.width, dtype=np.float64)
        for s in SECTION_ORDER:
            window = series[s].window_before(origin_ts, HISTORY_HOURS)
            shared[layout.edor_history(s)] = window
            shared[layout.crowding_history(s)] = window >= cfg.edor_threshold
        shared[layout.span("calendar")] = calendar
        shared[layout.span("weather")] = weather_vec
        shared[layout.origin_col] = origin
        for s in SECTION_ORDER:
            row = shared.copy()
            row[layout.span("weekly_lags")] = _weekly_lags(series[s], origin_ts)
            row[layout.subgroup_col] = section_code(s)
            row[layout.label_col] = float(labels[s].crowded)
            rows[r] = row
            meta.append(RowMeta(s, origin, labels[s].crowded))
            r += 1

    return DayMatrix(date=day, rows=rows, row_meta=tuple(meta))


def buildable_days(
    series: Mapping[Section, HourlySeries],
    start: date | None = None,
    end: date | None = None,
) -> list[date]:
    """Days with enough trailing history and a complete 24-hour span.

    The first buildable day lies ``WARMUP_DAYS`` after the common series
    start; the last one is the final fully covered day.
    """
    common_start = max(s.start for s in series.values())
    common_end = min(s.end_exclusive for s in series.values())
    if common_start.hour != 0:
        # Round up to the first midnight so day windows align.
        common_start = datetime(
            common_start.year, common_start.month, common_start.day
        ) + timedelta(days=1)
    first = common_start.date() + timedelta(days=WARMUP_DAYS)
    # A partial trailing day cannot be labeled, so full days end at the
    # last midnight boundary either way.
    last_exclusive = common_end.date()
    days: list[date] = []
    d = first
    while d < last_exclusive:
        days.append(d)
        d += timedelta(days=1)
    if start is not None:
        days = [d for d in days if d >= start]
    if end is not None:
        days = [d for d in days if d <= end]
    return days


def build_feature_dataset(
    series: Mapping[Section, HourlySeries],
    weather: Mapping[date, WeatherDay],
    holidays: HolidayCalendar,
    layout: FeatureLayout,
    cfg: CrowdingConfig,
    start: date | None = None,
    end: date | None = None,
) -> list[DayMatrix]:
    """Feature matrices for every buildable day, in date order."""
    matrices: list[DayMatrix] = []
    for day in buildable_days(series, start, end):
        if day not in weather:
            raise ValueError(f"missing covariate: weather for {day}")
        labels = {s: label_day(series[s].day_series(day), cfg) for s in SECTION_ORDER}
        matrices.append(
            build_day_matrix(day, series, labels, weather[day], holidays, layout, cfg)
        )
    return matrices


@dataclass(frozen=True)
class StackedRows:
    """Training table stacked from day matrices.

    ``features`` excludes the label column; ``eval_mask`` marks rows of the
    forecast-target sections (all rows are trained on, only marked rows are
    scored).
    """

    features: np.ndarray
    labels: np.ndarray
    dates: np.ndarray
    sections: np.ndarray
    origins: np.ndarray
    eval_mask: np.ndarray


def stack_training_rows(
    matrices: Sequence[DayMatrix],
    layout: FeatureLayout,
    targets_only: Sequence[Section] = TARGET_SECTIONS,
) -> StackedRows:
    """Concatenate day matrices into one cross-section training table."""
    if not matrices:
        raise ValueError("no day matrices to stack")
    width = layout.width
    for m in matrices:
        if m.rows.shape[1] != width:
            raise ValueError("inconsistent feature layout across day matrices")
    raw = np.concatenate([m.rows for m in matrices], axis=0)
    labels = raw[:, layout.label_col].astype(np.int8)
    features = raw[:, layout.model_columns()]

    dates = np.array([m.date for m in matrices for _ in m.row_meta], dtype=object)
    sections = np.array(
        [section_code(meta.section) for m in matrices for meta in m.row_meta],
        dtype=np.int8,
    )
    origins = np.array(
        [meta.origin_hour for m in matrices for meta in m.row_meta], dtype=np.int8
    )
    target_codes = {section_code(s) for s in targets_only}
    eval_mask = np.array([c in target_codes for c in sections], dtype=bool)

    meta_labels = np.array(
        [meta.target_label for m in matrices for meta in m.row_meta], dtype=np.int8
    )
    if not np.array_equal(meta_labels, labels):
        raise ValueError("label column disagrees with row metadata")
    return StackedRows(features, labels, dates, sections, origins, eval_mask)
