from datetime import date, datetime

import numpy as np
import pytest

from edcrowd.dataio import (
    DataError,
    ingest_edor,
    ingest_holidays,
    ingest_weather,
    write_edor_csv,
    write_holidays_csv,
    write_weather_csv,
)
from edcrowd.features import HolidayCalendar, WeatherDay
from edcrowd.series import SECTION_ORDER, HourlySeries, Section
from edcrowd.synthgen import SynthConfig, generate


def edor_lines(n_hours=48, value="0.5"):
    lines = ["timestamp,section,edor"]
    for code in ("bed", "med", "sur", "cri"):
        for h in range(n_hours):
            day, hour = divmod(h, 24)
            lines.append(f"2018-01-{day + 1:02d}T{hour:02d}:00:00,{code},{value}")
    return lines


def write(tmp_path, name, lines):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


class TestIngestEdor:
    def test_well_formed_two_days(self, tmp_path):
        path = write(tmp_path, "edor.csv", edor_lines())
        series = ingest_edor(path)
        assert set(series) == set(Section)
        for s in series.values():
            assert len(s) == 48
            assert s.start == datetime(2018, 1, 1)

    def test_values_above_one(self, tmp_path):
        path = write(tmp_path, "edor.csv", edor_lines(value="1.49"))
        series = ingest_edor(path)
        assert series[Section.BEDOCCUPYING].values[0] == 1.49

    def test_missing_hour_named_in_error(self, tmp_path):
        lines = [l for l in edor_lines() if not l.startswith("2018-01-02T13:00:00,bed")]
        path = write(tmp_path, "edor.csv", lines)
        with pytest.raises(DataError, match="2018-01-02T13:00:00"):
            ingest_edor(path)

    def test_duplicate_rejected_with_line(self, tmp_path):
        lines = edor_lines()
        lines.append("2018-01-01T00:00:00,bed,0.7")
        path = write(tmp_path, "edor.csv", lines)
        with pytest.raises(DataError, match="duplicate"):
            ingest_edor(path)

    def test_negative_rejected(self, tmp_path):
        lines = edor_lines()
        lines[1] = "2018-01-01T00:00:00,bed,-0.2"
        path = write(tmp_path, "edor.csv", lines)
        with pytest.raises(DataError, match="negative"):
            ingest_edor(path)

    def test_unknown_section_has_line_number(self, tmp_path):
        lines = edor_lines()
        lines[3] = "2018-01-01T02:00:00,xyz,0.4"
        path = write(tmp_path, "edor.csv", lines)
        with pytest.raises(DataError, match=r":4: unknown section"):
            ingest_edor(path)

    def test_misaligned_timestamp_rejected(self, tmp_path):
        lines = edor_lines()
        lines[1] = "2018-01-01T00:30:00,bed,0.5"
        path = write(tmp_path, "edor.csv", lines)
        with pytest.raises(DataError, match="hour-aligned"):
            ingest_edor(path)

    def test_missing_section_rejected(self, tmp_path):
        lines = [l for l in edor_lines() if ",cri," not in l]
        path = write(tmp_path, "edor.csv", lines)
        with pytest.raises(DataError, match="no rows for section cri"):
            ingest_edor(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = write(tmp_path, "edor.csv", ["time,sec,val", "x,y,z"])
        with pytest.raises(DataError, match="expected header"):
            ingest_edor(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="file not found"):
            ingest_edor(tmp_path / "nope.csv")


class TestIngestWeather:
    def test_roundtrip(self, tmp_path):
        weather = [
            WeatherDay(date(2018, 1, 1), 2.5, 10.0, 1.0, -6.0, -2.0),
            WeatherDay(date(2018, 1, 2), 0.0, 9.5, 2.0, -3.0, 0.5),
        ]
        path = tmp_path / "weather.csv"
        write_weather_csv(weather, path)
        back = ingest_weather(path)
        assert back[date(2018, 1, 1)] == weather[0]
        assert back[date(2018, 1, 2)] == weather[1]

    def test_invariant_violation_line_numbered(self, tmp_path):
        path = write(tmp_path, "weather.csv", [
            "date,precipitation,snow_depth,temp_max,temp_min,temp_mean",
            "2018-01-01,1.0,0.0,-5.0,5.0,0.0",  # max < min
        ])
        with pytest.raises(DataError, match=r":2: temperatures"):
            ingest_weather(path)

    def test_duplicate_date(self, tmp_path):
        path = write(tmp_path, "weather.csv", [
            "date,precipitation,snow_depth,temp_max,temp_min,temp_mean",
            "2018-01-01,1.0,0.0,5.0,-5.0,0.0",
            "2018-01-01,2.0,0.0,5.0,-5.0,0.0",
        ])
        with pytest.raises(DataError, match="duplicate weather date"):
            ingest_weather(path)


class TestIngestHolidays:
    def test_roundtrip(self, tmp_path):
        cal = HolidayCalendar([date(2018, 1, 1), date(2018, 12, 25)])
        path = tmp_path / "holidays.csv"
        write_holidays_csv(cal, path)
        assert ingest_holidays(path) == cal

    def test_duplicate_rejected(self, tmp_path):
        path = write(tmp_path, "holidays.csv", ["date", "2018-01-01", "2018-01-01"])
        with pytest.raises(DataError, match="duplicate holiday"):
            ingest_holidays(path)


class TestSynthRoundTrip:
    def test_edor_roundtrip_is_bitwise(self, tmp_path):
        data = generate(SynthConfig(n_days=60, seed=0))
        path = tmp_path / "edor.csv"
        write_edor_csv(data.series, path)
        back = ingest_edor(path)
        for section in Section:
            orig = data.series[section]
            got = back[section]
            assert got.start == orig.start
            assert np.array_equal(got.values, orig.values)

    def test_weather_and_holiday_roundtrip(self, tmp_path):
        data = generate(SynthConfig(n_days=60, seed=1))
        wpath = tmp_path / "weather.csv"
        hpath = tmp_path / "holidays.csv"
        write_weather_csv(data.weather, wpath)
        write_holidays_csv(data.holidays, hpath)
        assert tuple(ingest_weather(wpath).values()) == data.weather
        assert ingest_holidays(hpath) == data.holidays
