"""Shared fixtures: tiny series, record tuples and small trained models."""

from __future__ import annotations

from collections import namedtuple
from datetime import date, datetime

import numpy as np
import pytest

from edcrowd.gbdt import TrainConfig, fit
from edcrowd.series import CrowdingConfig, HourlySeries, Section

# Duck-typed prediction record: the metrics module only needs these fields.
Rec = namedtuple("Rec", "probability true_label")


def make_series(values, section=Section.BEDOCCUPYING, start=datetime(2018, 1, 1)):
    return HourlySeries(section, start, np.asarray(values, dtype=float))


def records(probs, labels):
    return [Rec(float(p), int(l)) for p, l in zip(probs, labels)]


@pytest.fixture
def crowding_cfg():
    return CrowdingConfig()


@pytest.fixture(scope="session")
def separable_data():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(300, 6))
    y = (x[:, 1] > 0).astype(np.int8)
    return x, y


@pytest.fixture(scope="session")
def small_ensemble(separable_data):
    x, y = separable_data
    config = TrainConfig(
        num_trees=4, num_leaves=5, min_data_in_leaf=10,
        goss_top_rate=1.0, goss_other_rate=0.0, seed=3,
    )
    return fit(x, y, config), x, y
