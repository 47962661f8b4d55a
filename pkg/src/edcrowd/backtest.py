"""Expanding-window evaluation of the crowding forecaster.

The model is refit before each retraining block using every feature row
dated strictly before the block, then scores the block's days. Rows of the
critical section are trained on but never scored. Reports collect the full
metric table per (section, origin) plus per-day outcome classes at one
origin for calendar rendering.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Optional, Sequence

import numpy as np

from .features import ORIGIN_HOURS, DayMatrix, FeatureLayout, StackedRows, stack_training_rows
from .gbdt.boosting import Ensemble, TrainConfig, fit
from .metrics import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_THRESHOLD,
    ConfusionCounts,
    MetricWithCI,
    Rates,
    auprc,
    auroc,
    bootstrap_ci,
    confusion,
    rates,
)
from .series import SECTION_ORDER, TARGET_SECTIONS, Section

DEFAULT_OUTCOME_ORIGIN = 11


@dataclass(frozen=True)
class SplitPlan:
    """Date ranges (inclusive) of the initial training and test periods."""

    train_start: date
    train_end: date
    test_start: date
    test_end: date
    retrain_every: int = 1

    def __post_init__(self) -> None:
        if self.train_start > self.train_end:
            raise ValueError("training range is empty")
        if self.test_start > self.test_end:
            raise ValueError("test range is empty")
        if self.train_end >= self.test_start:
            raise ValueError("training range must end before the test range starts")
        if self.retrain_every < 1:
            raise ValueError("retrain_every must be >= 1")


@dataclass(frozen=True)
class PredictionRecord:
    """One scored (day, section, origin) forecast."""

    date: date
    section: Section
    origin_hour: int
    probability: float
    true_label: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must be in [0, 1]")
        if self.section not in TARGET_SECTIONS:
            raise ValueError("prediction records cover target sections only")


@dataclass(frozen=True)
class FitSummary:
    """Metadata of one retraining iteration."""

    fit_date: date
    n_train_rows: int
    n_train_days: int
    n_trees: int


@dataclass
class BacktestResult:
    records: list[PredictionRecord]
    fits: list[FitSummary]
    model: Ensemble  # model of the final retraining block


def run_backtest(
    matrices: Sequence[DayMatrix],
    plan: SplitPlan,
    train_config: TrainConfig = TrainConfig(),
    layout: Optional[FeatureLayout] = None,
) -> BacktestResult:
    """Expanding-window backtest over prebuilt day matrices.

    For each retraining block (every ``plan.retrain_every`` test days) one
    model is fitted on all rows dated before the block start - all four
    sections, all origins pooled - and the block's days are scored at every
    origin for the three target sections.
    """
    layout = layout or FeatureLayout.default()
    matrices = sorted(matrices, key=lambda m: m.date)
    by_date = {m.date: m for m in matrices}

    test_days = [d for d in sorted(by_date) if plan.test_start <= d <= plan.test_end]
    expected_test = (plan.test_end - plan.test_start).days + 1
    if len(test_days) != expected_test:
        missing = expected_test - len(test_days)
        raise ValueError(
            f"warmup not satisfied: {missing} test day(s) in "
            f"[{plan.test_start}, {plan.test_end}] have no feature matrix"
        )

    stacked: StackedRows = stack_training_rows(matrices, layout)
    dates = stacked.dates
    target_codes = {SECTION_ORDER.index(s): s for s in TARGET_SECTIONS}

    records: list[PredictionRecord] = []
    fits: list[FitSummary] = []
    model: Optional[Ensemble] = None

    for block_start in range(0, len(test_days), plan.retrain_every):
        block = test_days[block_start : block_start + plan.retrain_every]
        cutoff = block[0]
        n_train = int(np.searchsorted(dates, cutoff))  # rows are in date order
        if n_train == 0:
            raise ValueError(f"empty training window before {cutoff}")
        model = fit(
            stacked.features[:n_train], stacked.labels[:n_train], train_config
        )
        fits.append(
            FitSummary(
                fit_date=cutoff,
                n_train_rows=n_train,
                n_train_days=len({d for d in dates[:n_train]}),
                n_trees=model.n_trees,
            )
        )
        for day in block:
            matrix = by_date[day]
            x_day = matrix.rows[:, layout.model_columns()]
            probs = model.predict_proba(x_day)
            for r, meta in enumerate(matrix.row_meta):
                code = SECTION_ORDER.index(meta.section)
                if code not in target_codes:
                    continue
                records.append(
                    PredictionRecord(
                        date=day,
                        section=meta.section,
                        origin_hour=meta.origin_hour,
                        probability=float(probs[r]),
                        true_label=int(meta.target_label),
                    )
                )
    assert model is not None
    return BacktestResult(records=records, fits=fits, model=model)


OUTCOME_CLASSES = ("TP", "FP", "TN", "FN")


def outcome_class(probability: float, true_label: int, threshold: float = DEFAULT_THRESHOLD) -> str:
    predicted = probability >= threshold
    if predicted:
        return "TP" if true_label else "FP"
    return "FN" if true_label else "TN"


@dataclass(frozen=True)
class MetricCell:
    """Full metric row for one (section, origin) pair."""

    section: Section
    origin_hour: int
    n_records: int
    prevalence: float
    counts: ConfusionCounts
    rates: Rates
    auroc: Optional[MetricWithCI]
    auprc: Optional[MetricWithCI]


@dataclass(frozen=True)
class DayOutcome:
    """Outcome class of one test day at the report origin."""

    date: date
    section: Section
    probability: float
    true_label: int
    outcome: str


@dataclass(frozen=True)
class EvalReport:
    cells: tuple[MetricCell, ...]
    outcomes: tuple[DayOutcome, ...]
    outcome_origin: int
    threshold: float
    n_bootstrap: int
    seed: int


def assemble_report(
    records: Sequence[PredictionRecord],
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    outcome_origin: int = DEFAULT_OUTCOME_ORIGIN,
    threshold: float = DEFAULT_THRESHOLD,
) -> EvalReport:
    """Metric cells per (section, origin) plus per-day outcomes at one origin.

    Ranking metrics get percentile-bootstrap intervals; cells whose records
    are single-class report them as unavailable (None) while the threshold
    metrics remain.
    """
    cells: list[MetricCell] = []
    for section in TARGET_SECTIONS:
        for origin in ORIGIN_HOURS:
            cell_records = [
                r for r in records if r.section == section and r.origin_hour == origin
            ]
            if not cell_records:
                raise ValueError(f"no records for {section.value} at origin {origin}")
            counts = confusion(cell_records, threshold)
            n = len(cell_records)
            prevalence = sum(r.true_label for r in cell_records) / n
            cell_seed = _cell_seed(seed, section, origin)
            try:
                roc_ci = bootstrap_ci(cell_records, auroc, n_bootstrap, cell_seed)
            except ValueError:
                roc_ci = None
            try:
                pr_ci = bootstrap_ci(cell_records, auprc, n_bootstrap, cell_seed + 1)
            except ValueError:
                pr_ci = None
            cells.append(
                MetricCell(
                    section=section,
                    origin_hour=origin,
                    n_records=n,
                    prevalence=prevalence,
                    counts=counts,
                    rates=rates(counts),
                    auroc=roc_ci,
                    auprc=pr_ci,
                )
            )

    outcomes = tuple(
        DayOutcome(
            date=r.date,
            section=r.section,
            probability=r.probability,
            true_label=r.true_label,
            outcome=outcome_class(r.probability, r.true_label, threshold),
        )
        for r in sorted(
            (r for r in records if r.origin_hour == outcome_origin),
            key=lambda r: (r.date, SECTION_ORDER.index(r.section)),
        )
    )
    return EvalReport(
        cells=tuple(cells),
        outcomes=outcomes,
        outcome_origin=outcome_origin,
        threshold=threshold,
        n_bootstrap=n_bootstrap,
        seed=seed,
    )


def _cell_seed(seed: int, section: Section, origin: int) -> int:
    return seed * 1000 + SECTION_ORDER.index(section) * 100 + origin * 2
