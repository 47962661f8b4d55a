"""Flat key = value run configuration with file parsing and snapshots.

A config file holds ``key = value`` lines ('#' starts a comment). Every key
has a schema entry; unknown keys are rejected. Command-line flags override
file values, and each run writes the fully resolved configuration next to
its outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from datetime import date
from pathlib import Path

from .backtest import SplitPlan
from .features import FeatureLayout
from .gbdt.boosting import TrainConfig
from .series import CrowdingConfig


class ConfigError(ValueError):
    """Invalid configuration file or value."""


@dataclass(frozen=True)
class RunConfig:
    """All tunables of the synth / backtest / explain commands."""

    # synthetic generation
    synth_n_days: int = 791
    synth_seed: int = 0
    synth_start: date = date(2018, 1, 1)
    synth_weather_coupling: float = 0.0
    # crowding definition
    crowding_edor_threshold: float = 0.90
    crowding_min_hours: int = 3
    # training
    train_num_trees: int = 100
    train_num_leaves: int = 31
    train_learning_rate: float = 0.1
    train_max_bins: int = 255
    train_min_data_in_leaf: int = 20
    train_goss_top_rate: float = 0.2
    train_goss_other_rate: float = 0.1
    train_lambda_l2: float = 1e-3
    train_positive_class_weight: float = 1.0
    train_seed: int = 0
    # evaluation protocol
    split_train_start: date = date(2018, 1, 1)
    split_train_end: date = date(2018, 12, 31)
    split_test_start: date = date(2019, 1, 1)
    split_test_end: date = date(2020, 2, 29)
    split_retrain_every: int = 1
    # reporting
    report_bootstrap: int = 200
    report_seed: int = 0
    report_origin: int = 11
    report_threshold: float = 0.5
    threads: int = 1

    def crowding_config(self) -> CrowdingConfig:
        return CrowdingConfig(self.crowding_edor_threshold, self.crowding_min_hours)

    def train_config(self, layout: FeatureLayout) -> TrainConfig:
        subgroup = layout.subgroup_col
        if subgroup > layout.label_col:
            subgroup -= 1
        return TrainConfig(
            num_trees=self.train_num_trees,
            num_leaves=self.train_num_leaves,
            learning_rate=self.train_learning_rate,
            max_bins=self.train_max_bins,
            min_data_in_leaf=self.train_min_data_in_leaf,
            goss_top_rate=self.train_goss_top_rate,
            goss_other_rate=self.train_goss_other_rate,
            lambda_l2=self.train_lambda_l2,
            categorical_features=(subgroup,),
            positive_class_weight=self.train_positive_class_weight,
            seed=self.train_seed,
        )

    def split_plan(self) -> SplitPlan:
        try:
            return SplitPlan(
                train_start=self.split_train_start,
                train_end=self.split_train_end,
                test_start=self.split_test_start,
                test_end=self.split_test_end,
                retrain_every=self.split_retrain_every,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _key_of(field_name: str) -> str:
    for prefix in ("synth", "crowding", "train", "split", "report"):
        if field_name.startswith(prefix + "_"):
            return prefix + "." + field_name[len(prefix) + 1 :]
    return field_name


_FIELD_BY_KEY = {_key_of(f.name): f for f in fields(RunConfig)}


def _parse_value(field, text: str):
    text = text.strip()
    try:
        if field.type == "int":
            return int(text)
        if field.type == "float":
            return float(text)
        if field.type == "date":
            return date.fromisoformat(text)
        return text
    except ValueError:
        raise ConfigError(
            f"invalid value {text!r} for key {_key_of(field.name)!r} ({field.type})"
        ) from None


def parse_config_file(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    """Read a config file on top of ``base`` (defaults when omitted)."""
    config = base or RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    overrides = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        field = _FIELD_BY_KEY.get(key)
        if field is None:
            raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
        overrides[field.name] = _parse_value(field, value)
    return replace(config, **overrides)


def config_text(config: RunConfig) -> str:
    """Serialize a config in the same key = value format it is read from."""
    lines = ["# resolved edcrowd run configuration"]
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, date):
            value = value.isoformat()
        lines.append(f"{_key_of(f.name)} = {value}")
    return "\n".join(lines) + "\n"


def write_config_snapshot(config: RunConfig, out_dir: str | Path) -> Path:
    path = Path(out_dir) / "resolved_config.txt"
    path.write_text(config_text(config))
    return path
