"""CSV ingestion and emission for occupancy, weather and holiday data.

All files are plain RFC-4180 CSV with a ``# format_version=1`` comment line
above the header. The ingesters validate aggressively and report the file
line number of the first offending row. Occupancy values round-trip
losslessly: writers emit ``repr`` of the float.
"""

from __future__ import annotations

import csv
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Mapping, Sequence

from .features import HolidayCalendar, WeatherDay
from .series import HOUR, SECTION_ORDER, HourlySeries, Section

FORMAT_VERSION_LINE = "# format_version=1"

EDOR_HEADER = ["timestamp", "section", "edor"]
WEATHER_HEADER = ["date", "precipitation", "snow_depth", "temp_max", "temp_min", "temp_mean"]
HOLIDAY_HEADER = ["date"]


class DataError(ValueError):
    """A malformed or inconsistent input file."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")
        self.path = str(path) if path is not None else None
        self.line = line


def _read_rows(path: str | Path, expected_header: list[str]):
    """Yield (line_number, row) for each data row, after header validation."""
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = None
        header_line = 0
        for line_no, row in enumerate(reader, start=1):
            if not row or (row[0].startswith("#") and len(row) == 1):
                continue
            header = row
            header_line = line_no
            break
        if header is None:
            raise DataError("empty file", path)
        if [h.strip() for h in header] != expected_header:
            raise DataError(
                f"expected header {','.join(expected_header)!r}, got {','.join(header)!r}",
                path,
                header_line,
            )
        for line_no, row in enumerate(reader, start=header_line + 1):
            if not row or (row[0].startswith("#") and len(row) == 1):
                continue
            if len(row) != len(expected_header):
                raise DataError(
                    f"expected {len(expected_header)} fields, got {len(row)}", path, line_no
                )
            yield line_no, row


def _parse_float(text: str, what: str, path, line_no) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"invalid {what}: {text!r}", path, line_no) from None


def _parse_date(text: str, path, line_no) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"invalid date: {text!r}", path, line_no) from None


def ingest_edor(path: str | Path) -> dict[Section, HourlySeries]:
    """Read hourly occupancy ratios for all four sections.

    Requires ISO-8601 hour-aligned timestamps, section codes in
    {bed, med, sur, cri}, non-negative values, no duplicate
    (timestamp, section) pairs and gap-free, aligned spans per section.
    """
    per_section: dict[Section, dict[datetime, float]] = {s: {} for s in SECTION_ORDER}
    codes = {s.value: s for s in SECTION_ORDER}
    for line_no, row in _read_rows(path, EDOR_HEADER):
        ts_text, section_text, value_text = row
        try:
            ts = datetime.fromisoformat(ts_text.strip())
        except ValueError:
            raise DataError(f"invalid timestamp: {ts_text!r}", path, line_no) from None
        if (ts.minute, ts.second, ts.microsecond) != (0, 0, 0):
            raise DataError(f"timestamp not hour-aligned: {ts_text!r}", path, line_no)
        section = codes.get(section_text.strip())
        if section is None:
            raise DataError(
                f"unknown section {section_text!r} (expected bed|med|sur|cri)", path, line_no
            )
        value = _parse_float(value_text, "edor value", path, line_no)
        if value < 0:
            raise DataError(f"negative edor value: {value}", path, line_no)
        if ts in per_section[section]:
            raise DataError(
                f"duplicate entry for ({ts_text.strip()}, {section_text.strip()})", path, line_no
            )
        per_section[section][ts] = value

    for section in SECTION_ORDER:
        if not per_section[section]:
            raise DataError(f"no rows for section {section.value}", path)

    series: dict[Section, HourlySeries] = {}
    spans = set()
    for section, samples in per_section.items():
        stamps = sorted(samples)
        start, end = stamps[0], stamps[-1]
        expected = int((end - start).total_seconds() // 3600) + 1
        if expected != len(stamps):
            missing = []
            ts = start
            have = set(stamps)
            while ts <= end and len(missing) < 5:
                if ts not in have:
                    missing.append(ts.isoformat())
                ts += HOUR
            raise DataError(
                f"section {section.value}: gap in hourly series, missing "
                f"{expected - len(stamps)} hour(s) starting at {', '.join(missing)}",
                path,
            )
        spans.add((start, end))
        series[section] = HourlySeries(section, start, [samples[start + i * HOUR] for i in range(expected)])
    if len(spans) != 1:
        raise DataError("sections cover different time spans", path)
    return series


def ingest_weather(path: str | Path) -> dict[date, WeatherDay]:
    """Read daily weather; validates field invariants and duplicate dates."""
    out: dict[date, WeatherDay] = {}
    for line_no, row in _read_rows(path, WEATHER_HEADER):
        d = _parse_date(row[0], path, line_no)
        if d in out:
            raise DataError(f"duplicate weather date {d}", path, line_no)
        values = [
            _parse_float(row[i], WEATHER_HEADER[i], path, line_no) for i in range(1, 6)
        ]
        try:
            out[d] = WeatherDay(d, *values)
        except ValueError as exc:
            raise DataError(str(exc), path, line_no) from None
    if not out:
        raise DataError("no weather rows", path)
    return out


def ingest_holidays(path: str | Path) -> HolidayCalendar:
    """Read the holiday date list; duplicates are rejected."""
    seen: set[date] = set()
    for line_no, row in _read_rows(path, HOLIDAY_HEADER):
        d = _parse_date(row[0], path, line_no)
        if d in seen:
            raise DataError(f"duplicate holiday {d}", path, line_no)
        seen.add(d)
    return HolidayCalendar(seen)


def write_edor_csv(series: Mapping[Section, HourlySeries], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(FORMAT_VERSION_LINE + "\n")
        writer = csv.writer(fh)
        writer.writerow(EDOR_HEADER)
        for section in SECTION_ORDER:
            s = series[section]
            ts = s.start
            for v in s.values:
                writer.writerow([ts.isoformat(sep="T"), section.value, repr(float(v))])
                ts += HOUR


def write_weather_csv(weather: Sequence[WeatherDay], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(FORMAT_VERSION_LINE + "\n")
        writer = csv.writer(fh)
        writer.writerow(WEATHER_HEADER)
        for w in sorted(weather, key=lambda w: w.date):
            writer.writerow(
                [w.date.isoformat()]
                + [repr(float(v)) for v in w.as_vector()]
            )


def write_holidays_csv(holidays: HolidayCalendar, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(FORMAT_VERSION_LINE + "\n")
        writer = csv.writer(fh)
        writer.writerow(HOLIDAY_HEADER)
        for d in holidays:
            writer.writerow([d.isoformat()])
