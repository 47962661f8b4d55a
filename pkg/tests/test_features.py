from datetime import date, datetime, timedelta

import numpy as np
import pytest

from edcrowd.features import (
    HISTORY_HOURS,
    ORIGIN_HOURS,
    WARMUP_DAYS,
    WEEKLY_LAGS,
    FeatureLayout,
    HolidayCalendar,
    WeatherDay,
    build_day_matrix,
    build_feature_dataset,
    buildable_days,
    section_code,
    stack_training_rows,
)
from edcrowd.series import SECTION_ORDER, CrowdingConfig, HourlySeries, Section, label_day

START = date(2018, 1, 1)


def constant_weather(days):
    return {
        d: WeatherDay(d, precipitation=1.0, snow_depth=0.0, temp_max=5.0,
                      temp_min=-5.0, temp_mean=0.0)
        for d in days
    }


def make_inputs(n_days, fill=0.5, seed=None):
    """Four aligned constant (or seeded random) series plus weather/holidays."""
    start_ts = datetime(START.year, START.month, START.day)
    n = n_days * 24
    series = {}
    for i, s in enumerate(SECTION_ORDER):
        if seed is None:
            values = np.full(n, fill)
        else:
            rng = np.random.default_rng(seed + i)
            values = rng.uniform(0.1, 1.2, n)
        series[s] = HourlySeries(s, start_ts, values)
    days = [START + timedelta(days=i) for i in range(n_days)]
    return series, constant_weather(days), HolidayCalendar([START])


def labels_for(series, day, cfg):
    return {s: label_day(series[s].day_series(day), cfg) for s in SECTION_ORDER}


class TestFeatureLayout:
    def test_default_width_is_1365(self):
        layout = FeatureLayout.default()
        assert layout.width == 1365

    def test_groups_are_contiguous_and_disjoint(self):
        layout = FeatureLayout.default()
        covered = []
        for name in layout.group_names:
            span = layout.span(name)
            covered.extend(range(span.start, span.stop))
        assert covered == list(range(1365))

    def test_history_groups_are_168_per_section(self):
        layout = FeatureLayout.default()
        for s in SECTION_ORDER:
            assert layout.edor_history(s).stop - layout.edor_history(s).start == 168
            assert (
                layout.crowding_history(s).stop - layout.crowding_history(s).start
                == 168
            )

    def test_model_columns_drop_label(self):
        layout = FeatureLayout.default()
        cols = layout.model_columns()
        assert len(cols) == 1364
        assert layout.label_col not in cols

    def test_model_group_columns_partition_model_space(self):
        layout = FeatureLayout.default()
        all_cols = np.concatenate(list(layout.model_group_columns().values()))
        assert sorted(all_cols.tolist()) == list(range(1364))


class TestWarmup:
    def test_first_buildable_day_matches_calendar_oracle(self):
        # Oracle: earliest day d such that every referenced timestamp
        # (168-hour windows before each origin, weekly lags back 8 weeks)
        # is inside the series.
        n_days = 70
        series, weather, holidays = make_inputs(n_days)
        start_ts = series[Section.BEDOCCUPYING].start

        def oracle_ok(day):
            earliest_needed = min(
                datetime(day.year, day.month, day.day, o) - timedelta(hours=k)
                for o in ORIGIN_HOURS
                for k in [HISTORY_HOURS, HISTORY_HOURS * WEEKLY_LAGS]
            )
            return earliest_needed >= start_ts

        all_days = [START + timedelta(days=i) for i in range(n_days)]
        oracle_first = next(d for d in all_days if oracle_ok(d))
        assert oracle_first == START + timedelta(days=56)  # day 57, index 56

        days = buildable_days(series)
        assert days[0] == oracle_first
        assert days[-1] == START + timedelta(days=n_days - 1)
        assert len(days) == n_days - WARMUP_DAYS

    def test_paper_scale_count(self):
        # 791 days minus 56 warmup days -> 735 buildable days.
        series, _, _ = make_inputs(60)
        start_ts = series[Section.BEDOCCUPYING].start
        big = {
            s: HourlySeries(s, start_ts, np.full(791 * 24, 0.5)) for s in SECTION_ORDER
        }
        assert len(buildable_days(big)) == 735

    def test_warmup_error_from_build(self, crowding_cfg):
        series, weather, holidays = make_inputs(10)
        layout = FeatureLayout.default()
        day = START + timedelta(days=9)
        with pytest.raises(ValueError, match="warmup not satisfied"):
            build_day_matrix(
                day, series, labels_for(series, day, crowding_cfg),
                weather[day], holidays, layout, crowding_cfg,
            )


class TestBuildDayMatrix:
    @pytest.fixture(scope="class")
    def built(self):
        cfg = CrowdingConfig()
        series, weather, holidays = make_inputs(60, fill=0.5)
        layout = FeatureLayout.default()
        day = START + timedelta(days=57)
        matrix = build_day_matrix(
            day, series, labels_for(series, day, cfg), weather[day], holidays,
            layout, cfg,
        )
        return matrix, layout, day

    def test_shape(self, built):
        matrix, layout, _ = built
        assert matrix.rows.shape == (24, 1365)
        assert len(matrix.row_meta) == 24

    def test_constant_series_features(self, built):
        matrix, layout, _ = built
        for s in SECTION_ORDER:
            assert (matrix.rows[:, layout.edor_history(s)] == 0.5).all()
            assert (matrix.rows[:, layout.crowding_history(s)] == 0.0).all()
        assert (matrix.rows[:, layout.span("weekly_lags")] == 0.5).all()

    def test_calendar_and_weather_columns(self, built):
        matrix, layout, day = built
        cal = matrix.rows[0, layout.span("calendar")]
        assert cal[0] == day.weekday()
        assert cal[1] == day.day
        assert cal[2] == day.month
        assert cal[3] == 0.0  # not a holiday
        assert cal[4] == day.timetuple().tm_yday
        assert list(matrix.rows[0, layout.span("weather")]) == [1.0, 0.0, 5.0, -5.0, 0.0]

    def test_row_identity_columns(self, built):
        matrix, layout, _ = built
        for r, meta in enumerate(matrix.row_meta):
            assert matrix.rows[r, layout.subgroup_col] == section_code(meta.section)
            assert matrix.rows[r, layout.origin_col] == meta.origin_hour
            assert matrix.rows[r, layout.label_col] == float(meta.target_label)

    def test_missing_weather_rejected(self, crowding_cfg):
        series, weather, holidays = make_inputs(60)
        layout = FeatureLayout.default()
        day = START + timedelta(days=57)
        with pytest.raises(ValueError, match="missing covariate"):
            build_day_matrix(
                day, series, labels_for(series, day, crowding_cfg),
                None, holidays, layout, crowding_cfg,
            )

    def test_determinism(self, crowding_cfg):
        series, weather, holidays = make_inputs(60, seed=11)
        layout = FeatureLayout.default()
        day = START + timedelta(days=58)
        labels = labels_for(series, day, crowding_cfg)
        a = build_day_matrix(day, series, labels, weather[day], holidays, layout, crowding_cfg)
        b = build_day_matrix(day, series, labels, weather[day], holidays, layout, crowding_cfg)
        assert a.rows.tobytes() == b.rows.tobytes()


class TestNoLeakage:
    def test_future_perturbation_changes_nothing(self, crowding_cfg):
        series, weather, holidays = make_inputs(60, seed=5)
        layout = FeatureLayout.default()
        day = START + timedelta(days=57)
        labels = labels_for(series, day, crowding_cfg)
        baseline = build_day_matrix(
            day, series, labels, weather[day], holidays, layout, crowding_cfg
        )
        rng = np.random.default_rng(0)
        day_start = datetime(day.year, day.month, day.day)
        for _ in range(20):
            # Perturb a value at or after a random row's origin hour.
            origin = int(rng.choice(ORIGIN_HOURS))
            offset = int(rng.integers(0, 48))
            ts = day_start + timedelta(hours=origin + offset)
            section = SECTION_ORDER[int(rng.integers(0, 4))]
            s = series[section]
            idx = s.index_at(ts)
            if idx >= len(s):
                continue
            mutated_values = s.values.copy()
            mutated_values[idx] = 5.0
            mutated = dict(series)
            mutated[section] = HourlySeries(section, s.start, mutated_values)
            matrix = build_day_matrix(
                day, mutated, labels, weather[day], holidays, layout, crowding_cfg
            )
            rows_at_or_after = [
                r for r, meta in enumerate(matrix.row_meta)
                if meta.origin_hour <= origin
            ]
            assert np.array_equal(
                matrix.rows[rows_at_or_after], baseline.rows[rows_at_or_after]
            )

    def test_cross_section_visibility(self, crowding_cfg):
        # Critical-section history must appear in medical rows.
        series, weather, holidays = make_inputs(60, seed=9)
        layout = FeatureLayout.default()
        day = START + timedelta(days=57)
        labels = labels_for(series, day, crowding_cfg)
        baseline = build_day_matrix(
            day, series, labels, weather[day], holidays, layout, crowding_cfg
        )
        s = series[Section.CRITICAL]
        ts = datetime(day.year, day.month, day.day, 7)  # before all origins
        mutated_values = s.values.copy()
        mutated_values[s.index_at(ts)] += 0.1
        mutated = dict(series)
        mutated[Section.CRITICAL] = HourlySeries(Section.CRITICAL, s.start, mutated_values)
        matrix = build_day_matrix(
            day, mutated, labels, weather[day], holidays, layout, crowding_cfg
        )
        med_rows = [
            r for r, meta in enumerate(matrix.row_meta)
            if meta.section == Section.MEDICAL
        ]
        assert not np.array_equal(matrix.rows[med_rows], baseline.rows[med_rows])


class TestStackTrainingRows:
    def test_one_matrix(self, crowding_cfg):
        series, weather, holidays = make_inputs(58)
        layout = FeatureLayout.default()
        matrices = build_feature_dataset(series, weather, holidays, layout, crowding_cfg)
        assert len(matrices) == 2
        stacked = stack_training_rows(matrices[:1], layout)
        assert stacked.features.shape == (24, 1364)
        assert stacked.eval_mask.sum() == 18

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            stack_training_rows([], FeatureLayout.default())

    def test_row_counts_scale(self, crowding_cfg):
        series, weather, holidays = make_inputs(61)
        layout = FeatureLayout.default()
        matrices = build_feature_dataset(series, weather, holidays, layout, crowding_cfg)
        stacked = stack_training_rows(matrices, layout)
        assert stacked.features.shape[0] == 24 * len(matrices)
        assert stacked.labels.shape[0] == stacked.features.shape[0]

    def test_label_column_not_in_features(self, crowding_cfg):
        # Set one section's label to 1 and check features are label-free:
        # two days differing only in label produce identical feature rows.
        series, weather, holidays = make_inputs(60, seed=3)
        layout = FeatureLayout.default()
        matrices = build_feature_dataset(series, weather, holidays, layout, crowding_cfg)
        stacked = stack_training_rows(matrices, layout)
        raw = np.concatenate([m.rows for m in matrices])
        assert stacked.features.shape[1] == raw.shape[1] - 1
        assert np.array_equal(stacked.labels, raw[:, layout.label_col].astype(np.int8))
