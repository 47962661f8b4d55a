"""Command-line interface: synth, backtest and explain subcommands.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from dataclasses import replace
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import assemble_report, run_backtest
from .dataio import (
    DataError,
    ingest_edor,
    ingest_holidays,
    ingest_weather,
    write_edor_csv,
    write_holidays_csv,
    write_weather_csv,
)
from .explain import group_importance, tree_shap_matrix
from .features import FeatureLayout, build_feature_dataset, stack_training_rows
from .gbdt.boosting import Ensemble
from .reports import (
    write_calendar_svg,
    write_calibration_csv,
    write_curve_points_csv,
    write_metrics_csv,
    write_outcomes_csv,
    write_predictions_csv,
    write_shap_groups_csv,
)
from .runconfig import ConfigError, RunConfig, parse_config_file, write_config_snapshot
from .series import TARGET_SECTIONS
from .synthgen import SynthConfig, calibration_report, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="edcrowd", description=__doc__)
    parser.add_argument("--version", action="version", version=f"edcrowd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a calibrated synthetic dataset")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--config", help="key = value config file")
    synth.add_argument("--n-days", type=int, dest="n_days")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--start", type=date.fromisoformat)

    back = sub.add_parser("backtest", help="expanding-window backtest over a dataset")
    back.add_argument("--edor", required=True)
    back.add_argument("--weather", required=True)
    back.add_argument("--holidays", required=True)
    back.add_argument("--out", required=True)
    back.add_argument("--config", help="key = value config file")
    back.add_argument("--train-start", type=date.fromisoformat, dest="train_start")
    back.add_argument("--train-end", type=date.fromisoformat, dest="train_end")
    back.add_argument("--test-start", type=date.fromisoformat, dest="test_start")
    back.add_argument("--test-end", type=date.fromisoformat, dest="test_end")
    back.add_argument("--retrain-every", type=int, dest="retrain_every")
    back.add_argument("--num-trees", type=int, dest="num_trees")
    back.add_argument("--bootstrap", type=int)
    back.add_argument("--report-origin", type=int, dest="report_origin")
    back.add_argument("--seed", type=int, help="training seed")
    back.add_argument("--threads", type=int, help="cap on kernel threads")

    explain = sub.add_parser("explain", help="feature-group attribution of a saved model")
    explain.add_argument("--model", required=True)
    explain.add_argument("--edor", required=True)
    explain.add_argument("--weather", required=True)
    explain.add_argument("--holidays", required=True)
    explain.add_argument("--out", required=True)
    explain.add_argument("--config", help="key = value config file")
    explain.add_argument("--origin", type=int, help="restrict to one forecast origin")
    explain.add_argument("--start", type=date.fromisoformat, help="first day to attribute")
    explain.add_argument("--end", type=date.fromisoformat, help="last day to attribute")
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        config = parse_config_file(args.config, config)
    overrides = {}
    mapping = {
        "n_days": "synth_n_days",
        "seed": {"synth": "synth_seed", "backtest": "train_seed"}.get(args.command),
        "start": "synth_start",
        "train_start": "split_train_start",
        "train_end": "split_train_end",
        "test_start": "split_test_start",
        "test_end": "split_test_end",
        "retrain_every": "split_retrain_every",
        "num_trees": "train_num_trees",
        "bootstrap": "report_bootstrap",
        "report_origin": "report_origin",
        "threads": "threads",
    }
    for arg_name, field_name in mapping.items():
        if field_name is None:
            continue
        value = getattr(args, arg_name, None)
        if value is not None:
            overrides[field_name] = value
    try:
        return replace(config, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_thread_cap(threads: int) -> None:
    # The numeric kernels are sequential; the cap only bounds numba's pool.
    if threads and threads > 0:
        try:
            import numba

            numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
        except (ImportError, ValueError):
            pass


def cmd_synth(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    try:
        synth_config = SynthConfig(
            n_days=config.synth_n_days,
            seed=config.synth_seed,
            start=config.synth_start,
            weather_coupling=config.synth_weather_coupling,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = generate(synth_config)
    write_edor_csv(data.series, out / "edor.csv")
    write_weather_csv(data.weather, out / "weather.csv")
    write_holidays_csv(data.holidays, out / "holidays.csv")
    report = calibration_report(data.series, config.crowding_config())
    write_calibration_csv(report, out / "calibration_report.csv")
    write_config_snapshot(config, out)
    status = "passed" if report.passed else "FAILED"
    print(f"synth: wrote {config.synth_n_days} days to {out} (calibration {status})")
    return EXIT_OK


def _ingest_inputs(args, config: RunConfig):
    series = ingest_edor(args.edor)
    weather = ingest_weather(args.weather)
    holidays = ingest_holidays(args.holidays)
    return series, weather, holidays


def cmd_backtest(args) -> int:
    config = _load_config(args)
    _apply_thread_cap(config.threads)
    out = _out_dir(args)
    plan = config.split_plan()
    layout = FeatureLayout.default()
    series, weather, holidays = _ingest_inputs(args, config)
    matrices = build_feature_dataset(
        series, weather, holidays, layout, config.crowding_config(),
        start=plan.train_start, end=plan.test_end,
    )
    result = run_backtest(matrices, plan, config.train_config(layout), layout)
    report = assemble_report(
        result.records,
        n_bootstrap=config.report_bootstrap,
        seed=config.report_seed,
        outcome_origin=config.report_origin,
        threshold=config.report_threshold,
    )
    write_metrics_csv(report, out / "metrics.csv")
    write_predictions_csv(result.records, out / "predictions.csv")
    write_outcomes_csv(report, out / f"outcomes_origin{config.report_origin}.csv")
    write_curve_points_csv(result.records, out / "roc_pr_points.csv")
    for section in TARGET_SECTIONS:
        write_calendar_svg(
            report.outcomes, section, out / f"calendar_map_{section.value}.svg"
        )
    result.model.save(out / "model.json")
    write_config_snapshot(config, out)
    print(
        f"backtest: {len(result.fits)} fits, {len(result.records)} predictions, "
        f"reports in {out}"
    )
    return EXIT_OK


def cmd_explain(args) -> int:
    config = _load_config(args)
    _apply_thread_cap(config.threads)
    out = _out_dir(args)
    model_path = Path(args.model)
    if not model_path.exists():
        raise DataError("model file not found", model_path)
    model = Ensemble.load(model_path)
    layout = FeatureLayout.default()
    if model.n_features != layout.model_width():
        raise DataError(
            f"model/layout mismatch: model has {model.n_features} features, "
            f"layout expects {layout.model_width()}",
            model_path,
        )
    series, weather, holidays = _ingest_inputs(args, config)
    matrices = build_feature_dataset(
        series, weather, holidays, layout, config.crowding_config(),
        start=args.start, end=args.end,
    )
    if not matrices:
        raise DataError("no feature rows in the requested range", args.edor)
    stacked = stack_training_rows(matrices, layout)
    mask = stacked.eval_mask.copy()
    if args.origin is not None:
        mask &= stacked.origins == args.origin
        if not mask.any():
            raise DataError(f"no rows at origin {args.origin}", args.edor)
    phi, _ = tree_shap_matrix(model, stacked.features[mask])
    importance = group_importance(phi, layout)
    write_shap_groups_csv(importance, out / "shap_groups.csv")
    write_config_snapshot(config, out)
    top = importance.ranked()[0]
    print(
        f"explain: attributed {int(mask.sum())} rows; top group {top[0]} "
        f"(mean |contribution| {top[1]:.4f})"
    )
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "backtest":
            return cmd_backtest(args)
        if args.command == "explain":
            return cmd_explain(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # argparse --help / --version
        code = exc.code if isinstance(exc.code, int) else 0
        return code
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
