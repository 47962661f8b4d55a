import json

import numpy as np
import pytest

from edcrowd.gbdt import Ensemble, TrainConfig, fit
from edcrowd.metrics import auroc

from conftest import records


def logloss(y, p):
    eps = 1e-12
    p = np.clip(p, eps, 1 - eps)
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())


class TestFitBasics:
    def test_separable_reaches_perfect_train_auroc(self, separable_data):
        x, y = separable_data
        model = fit(x, y, TrainConfig(num_trees=10, seed=0))
        assert model.n_trees <= 10
        score = auroc(records(model.predict_proba(x), y))
        assert score == 1.0

    def test_degenerate_labels_rejected(self):
        x = np.random.default_rng(0).normal(size=(20, 2))
        with pytest.raises(ValueError, match="degenerate labels"):
            fit(x, np.zeros(20, dtype=int))

    def test_non_binary_labels_rejected(self):
        x = np.zeros((4, 1))
        with pytest.raises(ValueError):
            fit(x, np.array([0, 1, 2, 1]))

    def test_nan_features_rejected(self):
        x = np.zeros((4, 2))
        x[1, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            fit(x, np.array([0, 1, 0, 1]))

    def test_constant_features_predict_prevalence(self):
        x = np.ones((50, 3))
        y = np.array([1] * 20 + [0] * 30)
        model = fit(x, y, TrainConfig(num_trees=5, seed=0))
        assert model.n_trees == 0
        assert np.allclose(model.predict_proba(x), 0.4, atol=1e-12)

    def test_zero_trees_predicts_prevalence(self, separable_data):
        x, y = separable_data
        model = fit(x, y, TrainConfig(num_trees=0))
        assert np.allclose(model.predict_proba(x), y.mean(), atol=1e-12)

    def test_probabilities_in_open_interval(self, separable_data):
        x, y = separable_data
        model = fit(x, y, TrainConfig(num_trees=20, seed=1))
        p = model.predict_proba(x)
        assert (p > 0).all() and (p < 1).all()

    def test_monotone_direction_on_separable_feature(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-2, 2, size=(200, 1))
        y = (x[:, 0] > 0).astype(int)
        config = TrainConfig(
            num_trees=10, seed=0, goss_top_rate=1.0, goss_other_rate=0.0
        )
        model = fit(x, y, config)
        order = np.argsort(x[:, 0])
        p = model.predict_proba(x)[order]
        assert (np.diff(p) >= -1e-12).all()

    def test_width_mismatch_rejected(self, small_ensemble):
        model, x, _ = small_ensemble
        with pytest.raises(ValueError, match="width mismatch"):
            model.predict_proba(x[:, :3])


class TestDeterminismAndLoss:
    def test_bitwise_deterministic(self, separable_data):
        x, y = separable_data
        config = TrainConfig(num_trees=8, seed=5)
        a = fit(x, y, config).predict_raw(x)
        b = fit(x, y, config).predict_raw(x)
        assert np.array_equal(a, b)

    def test_goss_changes_sampling_but_learns(self, separable_data):
        x, y = separable_data
        config = TrainConfig(
            num_trees=15, goss_top_rate=0.2, goss_other_rate=0.1, seed=2
        )
        model = fit(x, y, config)
        assert auroc(records(model.predict_proba(x), y)) > 0.99

    def test_train_logloss_decreases_without_goss(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(250, 5))
        y = ((x[:, 0] + 0.6 * x[:, 3] + rng.normal(0, 0.7, 250)) > 0).astype(int)
        losses = []
        for n_trees in range(0, 9):
            config = TrainConfig(
                num_trees=n_trees, goss_top_rate=1.0, goss_other_rate=0.0, seed=0
            )
            model = fit(x, y, config)
            losses.append(logloss(y, model.predict_proba(x)))
        diffs = np.diff(losses)
        assert (diffs <= 1e-12).all()

    def test_shuffled_labels_near_chance_on_holdout(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(400, 8))
        y = rng.integers(0, 2, 400)
        model = fit(x[:200], y[:200], TrainConfig(num_trees=20, seed=0))
        holdout = auroc(records(model.predict_proba(x[200:]), y[200:]))
        assert 0.35 < holdout < 0.65


class TestSerialization:
    def test_json_roundtrip_bitwise(self, small_ensemble):
        model, x, _ = small_ensemble
        payload = json.dumps(model.to_dict())
        clone = Ensemble.from_dict(json.loads(payload))
        assert np.array_equal(model.predict_raw(x), clone.predict_raw(x))
        assert json.dumps(clone.to_dict()) == payload

    def test_save_load(self, small_ensemble, tmp_path):
        model, x, _ = small_ensemble
        path = tmp_path / "model.json"
        model.save(path)
        clone = Ensemble.load(path)
        assert np.array_equal(model.predict_raw(x), clone.predict_raw(x))

    def test_version_check(self, small_ensemble):
        model, _, _ = small_ensemble
        d = model.to_dict()
        d["format_version"] = 99
        with pytest.raises(ValueError, match="format_version"):
            Ensemble.from_dict(d)

    def test_categorical_roundtrip(self):
        rng = np.random.default_rng(6)
        x = np.column_stack([
            rng.integers(0, 4, 300).astype(float), rng.normal(size=300)
        ])
        y = ((x[:, 0] == 2) | (x[:, 1] > 1)).astype(int)
        model = fit(x, y, TrainConfig(num_trees=6, categorical_features=(0,), seed=0))
        clone = Ensemble.from_dict(json.loads(json.dumps(model.to_dict())))
        probe = np.column_stack([
            np.array([0.0, 1.0, 2.0, 3.0, 9.0]), np.zeros(5)
        ])
        assert np.array_equal(model.predict_raw(probe), clone.predict_raw(probe))

    def test_unseen_category_goes_right(self):
        # A category never seen in training must take the right branch of
        # every categorical split; the output still lies in (0, 1).
        rng = np.random.default_rng(7)
        x = np.column_stack([rng.integers(0, 3, 200).astype(float)])
        y = (x[:, 0] == 1).astype(int)
        model = fit(x, y, TrainConfig(num_trees=3, categorical_features=(0,), seed=0))
        seen_right = model.predict_raw(np.array([[0.0]]))[0]
        unseen = model.predict_raw(np.array([[17.0]]))[0]
        assert 0.0 < model.predict_proba(np.array([[17.0]]))[0] < 1.0
        assert unseen == pytest.approx(seen_right, abs=1e-12)
