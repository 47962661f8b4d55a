"""End-to-end CLI tests on a small synthetic dataset."""

import csv
import json
from pathlib import Path
from xml.etree import ElementTree as ET

import pytest

from edcrowd.cli import main
from edcrowd.gbdt import Ensemble

CONFIG_TEXT = """
# small end-to-end run
synth.n_days = 76
synth.seed = 0
split.train_start = 2018-01-01
split.train_end = 2018-03-12
split.test_start = 2018-03-13
split.test_end = 2018-03-17
train.num_trees = 5
train.num_leaves = 8
train.min_data_in_leaf = 5
report.bootstrap = 25
"""


def read_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if not (r and r[0].startswith("#"))]
    return rows


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "run.cfg"
    config.write_text(CONFIG_TEXT)
    data_dir = root / "data"
    code = main([
        "synth", "--out", str(data_dir), "--config", str(config),
    ])
    assert code == 0
    return root, config, data_dir


@pytest.fixture(scope="module")
def backtest_dir(workspace):
    root, config, data_dir = workspace
    out = root / "bt"
    code = main([
        "backtest",
        "--edor", str(data_dir / "edor.csv"),
        "--weather", str(data_dir / "weather.csv"),
        "--holidays", str(data_dir / "holidays.csv"),
        "--config", str(config),
        "--out", str(out),
    ])
    assert code == 0
    return out


class TestSynthCommand:
    def test_writes_all_files(self, workspace):
        _, _, data_dir = workspace
        for name in ("edor.csv", "weather.csv", "holidays.csv",
                     "calibration_report.csv", "resolved_config.txt"):
            assert (data_dir / name).exists(), name

    def test_same_seed_identical_bytes(self, workspace, tmp_path):
        root, config, data_dir = workspace
        again = tmp_path / "again"
        assert main(["synth", "--out", str(again), "--config", str(config)]) == 0
        for name in ("edor.csv", "weather.csv", "holidays.csv"):
            assert (again / name).read_bytes() == (data_dir / name).read_bytes()

    def test_warmup_viability_error(self, tmp_path):
        code = main(["synth", "--out", str(tmp_path / "x"), "--n-days", "10"])
        assert code == 1

    def test_resolved_config_snapshot_parses(self, workspace):
        from edcrowd.runconfig import parse_config_file

        _, _, data_dir = workspace
        config = parse_config_file(data_dir / "resolved_config.txt")
        assert config.synth_n_days == 76


class TestBacktestCommand:
    def test_metrics_layout(self, backtest_dir):
        rows = read_csv(backtest_dir / "metrics.csv")
        assert rows[0] == [
            "target", "origin", "F1", "TPR", "TNR", "PPV", "NPV", "FPR", "FNR",
            "ACC", "AUROC (CI)", "PRAUC (CI)",
        ]
        assert len(rows) == 1 + 18
        assert len(rows[1]) == 12

    def test_outputs_exist(self, backtest_dir):
        for name in (
            "predictions.csv", "outcomes_origin11.csv", "roc_pr_points.csv",
            "model.json", "resolved_config.txt",
            "calendar_map_bed.svg", "calendar_map_med.svg", "calendar_map_sur.svg",
        ):
            assert (backtest_dir / name).exists(), name

    def test_predictions_row_count(self, backtest_dir):
        rows = read_csv(backtest_dir / "predictions.csv")
        assert len(rows) == 1 + 5 * 18  # five test days

    def test_svg_is_wellformed_with_one_cell_per_day(self, backtest_dir):
        tree = ET.parse(backtest_dir / "calendar_map_bed.svg")
        ns = {"svg": "http://www.w3.org/2000/svg"}
        rects = tree.getroot().findall(".//svg:rect", ns)
        # 5 test days + 4 legend swatches
        assert len(rects) == 5 + 4

    def test_model_loads(self, backtest_dir):
        model = Ensemble.load(backtest_dir / "model.json")
        assert model.n_features == 1364

    def test_rerun_byte_identical(self, workspace, backtest_dir, tmp_path):
        root, config, data_dir = workspace
        out2 = tmp_path / "bt2"
        code = main([
            "backtest",
            "--edor", str(data_dir / "edor.csv"),
            "--weather", str(data_dir / "weather.csv"),
            "--holidays", str(data_dir / "holidays.csv"),
            "--config", str(config),
            "--out", str(out2),
        ])
        assert code == 0
        for name in ("metrics.csv", "predictions.csv", "outcomes_origin11.csv",
                     "roc_pr_points.csv", "model.json", "calendar_map_bed.svg"):
            assert (out2 / name).read_bytes() == (backtest_dir / name).read_bytes()

    def test_test_before_train_is_usage_error(self, workspace, tmp_path):
        _, config, data_dir = workspace
        code = main([
            "backtest",
            "--edor", str(data_dir / "edor.csv"),
            "--weather", str(data_dir / "weather.csv"),
            "--holidays", str(data_dir / "holidays.csv"),
            "--config", str(config),
            "--test-start", "2017-01-01",
            "--test-end", "2017-01-05",
            "--out", str(tmp_path / "x"),
        ])
        assert code == 1

    def test_malformed_edor_is_data_error(self, workspace, tmp_path):
        _, config, data_dir = workspace
        bad = tmp_path / "bad.csv"
        bad.write_text("timestamp,section,edor\n2018-01-01T00:00:00,bed,-1\n")
        code = main([
            "backtest",
            "--edor", str(bad),
            "--weather", str(data_dir / "weather.csv"),
            "--holidays", str(data_dir / "holidays.csv"),
            "--config", str(config),
            "--out", str(tmp_path / "y"),
        ])
        assert code == 2


class TestExplainCommand:
    def test_shap_groups_output(self, workspace, backtest_dir, tmp_path):
        _, config, data_dir = workspace
        out = tmp_path / "explain"
        code = main([
            "explain",
            "--model", str(backtest_dir / "model.json"),
            "--edor", str(data_dir / "edor.csv"),
            "--weather", str(data_dir / "weather.csv"),
            "--holidays", str(data_dir / "holidays.csv"),
            "--config", str(config),
            "--start", "2018-03-13",
            "--end", "2018-03-17",
            "--origin", "11",
            "--out", str(out),
        ])
        assert code == 0
        rows = read_csv(out / "shap_groups.csv")
        assert rows[0] == ["group", "mean_abs_shap", "rank"]
        assert len(rows) == 1 + 13  # 13 model feature groups
        ranks = [int(r[2]) for r in rows[1:]]
        assert ranks == list(range(1, 14))
        values = [float(r[1]) for r in rows[1:]]
        assert values == sorted(values, reverse=True)

    def test_missing_model_is_data_error(self, workspace, tmp_path):
        _, config, data_dir = workspace
        code = main([
            "explain",
            "--model", str(tmp_path / "missing.json"),
            "--edor", str(data_dir / "edor.csv"),
            "--weather", str(data_dir / "weather.csv"),
            "--holidays", str(data_dir / "holidays.csv"),
            "--out", str(tmp_path / "z"),
        ])
        assert code == 2


class TestUsage:
    def test_unknown_flag(self):
        assert main(["synth", "--nope"]) == 1

    def test_missing_command(self):
        assert main([]) == 1

    def test_unknown_config_key(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("nonsense.key = 5\n")
        assert main(["synth", "--out", str(tmp_path / "o"), "--config", str(config)]) == 1
