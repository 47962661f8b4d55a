"""Binary-classification metrics with percentile-bootstrap intervals.

Functions take sequences of prediction records (anything exposing
``probability`` and ``true_label``). A record is predicted positive when its
probability is at or above the threshold (inclusive).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_THRESHOLD = 0.5
DEFAULT_BOOTSTRAP = 200
_CI_PERCENTILES = (2.5, 97.5)


def _probs_labels(records: Sequence) -> tuple[np.ndarray, np.ndarray]:
    probs = np.array([r.probability for r in records], dtype=np.float64)
    labels = np.array([int(r.true_label) for r in records], dtype=np.int64)
    return probs, labels


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class CurvePoint:
    """One operating point of the ROC / precision-recall curves."""

    threshold: float
    tpr: float
    fpr: float
    precision: float
    recall: float


@dataclass(frozen=True)
class MetricWithCI:
    """Point estimate with a percentile-bootstrap confidence interval.

    The point estimate comes from the original sample and may fall outside
    the percentile interval; only ci_low <= ci_high is guaranteed.
    """

    point: float
    ci_low: float
    ci_high: float
    n_bootstrap: int

    def __post_init__(self) -> None:
        if self.ci_low > self.ci_high:
            raise ValueError("ci_low must not exceed ci_high")


def confusion(records: Sequence, threshold: float = DEFAULT_THRESHOLD) -> ConfusionCounts:
    """Confusion counts at a probability threshold (>= threshold is positive)."""
    probs, labels = _probs_labels(records)
    pred = probs >= threshold
    pos = labels == 1
    return ConfusionCounts(
        tp=int(np.count_nonzero(pred & pos)),
        fp=int(np.count_nonzero(pred & ~pos)),
        tn=int(np.count_nonzero(~pred & ~pos)),
        fn=int(np.count_nonzero(~pred & pos)),
    )


@dataclass(frozen=True)
class Rates:
    """Confusion-derived rates; a rate with a zero denominator is NaN and
    its name is listed in ``undefined``."""

    tpr: float
    tnr: float
    ppv: float
    npv: float
    fpr: float
    fnr: float
    acc: float
    f1: float
    undefined: frozenset = field(default_factory=frozenset)


def rates(counts: ConfusionCounts) -> Rates:
    """All Table-style rates from confusion counts.

    F1 uses the 2*tp / (2*tp + fp + fn) form and is 0 by convention when
    that denominator is zero.
    """
    if counts.total == 0:
        raise ValueError("cannot compute rates with zero records")
    undefined = set()

    def ratio(name: str, num: int, den: int) -> float:
        if den == 0:
            undefined.add(name)
            return float("nan")
        return num / den

    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    f1_den = 2 * tp + fp + fn
    return Rates(
        tpr=ratio("tpr", tp, tp + fn),
        tnr=ratio("tnr", tn, tn + fp),
        ppv=ratio("ppv", tp, tp + fp),
        npv=ratio("npv", tn, tn + fn),
        fpr=ratio("fpr", fp, fp + tn),
        fnr=ratio("fnr", fn, fn + tp),
        acc=(tp + tn) / counts.total,
        f1=(2 * tp / f1_den) if f1_den else 0.0,
        undefined=frozenset(undefined),
    )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Rank from 1, ties sharing the average of their rank span."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(records: Sequence) -> float:
    """Area under the ROC curve via the rank statistic.

    Equals the probability that a random positive scores above a random
    negative, with ties credited one half.
    """
    probs, labels = _probs_labels(records)
    n_pos = int((labels == 1).sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC undefined: need both classes")
    ranks = _average_ranks(probs)
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc(records: Sequence) -> float:
    """Area under the precision-recall curve (average precision).

    Step sum of precision over recall increments at each distinct score,
    descending; equal scores collapse into a single threshold.
    """
    probs, labels = _probs_labels(records)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise ValueError("AUPRC undefined: no positive records")
    order = np.argsort(-probs, kind="mergesort")
    sorted_probs = probs[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(1 - sorted_labels)
    # keep only the last row of each tied-score block
    last = np.ones(probs.size, dtype=bool)
    last[:-1] = sorted_probs[1:] != sorted_probs[:-1]
    tp, fp = tp[last], fp[last]
    recall = tp / n_pos
    precision = tp / (tp + fp)
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(((recall - prev_recall) * precision).sum())


def curve_points(records: Sequence) -> list[CurvePoint]:
    """ROC / PR operating points at every distinct score, descending.

    Starts from the all-negative anchor (threshold inf, precision 1 by
    convention).
    """
    probs, labels = _probs_labels(records)
    n_pos = int((labels == 1).sum())
    n_neg = labels.size - n_pos
    order = np.argsort(-probs, kind="mergesort")
    sorted_probs = probs[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(1 - sorted_labels)
    last = np.ones(probs.size, dtype=bool)
    last[:-1] = sorted_probs[1:] != sorted_probs[:-1]
    points = [CurvePoint(float("inf"), 0.0, 0.0, 1.0, 0.0)]
    for i in np.nonzero(last)[0]:
        tpi, fpi = int(tp[i]), int(fp[i])
        points.append(
            CurvePoint(
                threshold=float(sorted_probs[i]),
                tpr=tpi / n_pos if n_pos else 0.0,
                fpr=fpi / n_neg if n_neg else 0.0,
                precision=tpi / (tpi + fpi),
                recall=tpi / n_pos if n_pos else 0.0,
            )
        )
    return points


def bootstrap_ci(
    records: Sequence,
    metric: Callable[[Sequence], float],
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> MetricWithCI:
    """Percentile bootstrap interval for a metric of prediction records.

    Draws ``n_bootstrap`` resamples with replacement (same size as the
    original); resamples on which the metric is undefined are redrawn, with
    the number of failed draws capped at ``10 * n_bootstrap``.
    """
    records = list(records)
    n = len(records)
    if n == 0:
        raise ValueError("no records to bootstrap")
    point = float(metric(records))
    rng = np.random.default_rng(seed)
    values = np.empty(n_bootstrap, dtype=np.float64)
    got = 0
    failures = 0
    max_failures = 10 * n_bootstrap
    while got < n_bootstrap:
        idx = rng.integers(0, n, size=n)
        resample = [records[i] for i in idx]
        try:
            values[got] = metric(resample)
        except ValueError:
            failures += 1
            if failures > max_failures:
                raise ValueError("metric unstable under resampling")
            continue
        got += 1
    lo, hi = np.percentile(values, _CI_PERCENTILES)
    return MetricWithCI(point=point, ci_low=float(lo), ci_high=float(hi), n_bootstrap=n_bootstrap)
