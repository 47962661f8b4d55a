"""Quantile binning of feature columns into small integer codes.

Numeric features get at most ``max_bins`` quantile bins; a value lands in
bin ``b`` when it is <= the bin's upper edge. Categorical features map each
distinct training value to a code; values unseen at training time get a
sentinel code one past the last category, which no split ever routes left.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

#: Codes are stored as uint8, so 255 bins plus the categorical sentinel fit.
MAX_BINS_LIMIT = 255


@dataclass(frozen=True)
class FeatureBins:
    """Binning rule for a single feature."""

    kind: str
    upper_edges: np.ndarray | None = None  # numeric: ascending interior edges
    categories: np.ndarray | None = None  # categorical: sorted training values

    def __post_init__(self) -> None:
        if self.kind == NUMERIC:
            edges = np.asarray(self.upper_edges, dtype=np.float64)
            if edges.size and np.any(np.diff(edges) <= 0):
                raise ValueError("bin edges must be strictly increasing")
            edges.flags.writeable = False
            object.__setattr__(self, "upper_edges", edges)
        elif self.kind == CATEGORICAL:
            cats = np.asarray(self.categories, dtype=np.float64)
            if cats.size == 0:
                raise ValueError("categorical feature with no categories")
            cats.flags.writeable = False
            object.__setattr__(self, "categories", cats)
        else:
            raise ValueError(f"unknown bin kind {self.kind!r}")

    @property
    def n_bins(self) -> int:
        """Number of codes the binned feature can take (training data only)."""
        if self.kind == NUMERIC:
            return int(self.upper_edges.size) + 1
        return int(self.categories.size)

    @property
    def sentinel(self) -> int:
        """Code assigned to categorical values unseen at training time."""
        if self.kind != CATEGORICAL:
            raise ValueError("sentinel only defined for categorical features")
        return int(self.categories.size)


class BinMapper:
    """Per-feature binning rules plus the transform to integer codes."""

    def __init__(self, features: Sequence[FeatureBins], max_bins: int):
        self.features = tuple(features)
        self.max_bins = int(max_bins)
        self.n_features = len(self.features)
        self.n_bins = np.array([f.n_bins for f in self.features], dtype=np.int32)
        self.bin_offsets = np.zeros(self.n_features + 1, dtype=np.int64)
        np.cumsum(self.n_bins, out=self.bin_offsets[1:])
        self.is_categorical = np.array(
            [f.kind == CATEGORICAL for f in self.features], dtype=bool
        )

    @property
    def total_bins(self) -> int:
        return int(self.bin_offsets[-1])

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Map raw rows (n, n_features) to feature-major codes (n_features, n)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} feature columns, got {x.shape}"
            )
        n = x.shape[0]
        xt = np.ascontiguousarray(x.T)  # contiguous per-feature slices
        codes = np.empty((self.n_features, n), dtype=np.uint8)
        for f, fb in enumerate(self.features):
            col = xt[f]
            if fb.kind == NUMERIC:
                codes[f] = np.searchsorted(fb.upper_edges, col, side="left")
            else:
                pos = np.searchsorted(fb.categories, col, side="left")
                pos = np.minimum(pos, fb.categories.size - 1)
                hit = fb.categories[pos] == col
                codes[f] = np.where(hit, pos, fb.sentinel)
        return codes

    def to_dict(self) -> dict:
        out = []
        for fb in self.features:
            if fb.kind == NUMERIC:
                out.append({"kind": NUMERIC, "upper_edges": fb.upper_edges.tolist()})
            else:
                out.append({"kind": CATEGORICAL, "categories": fb.categories.tolist()})
        return {"max_bins": self.max_bins, "features": out}

    @classmethod
    def from_dict(cls, d: dict) -> "BinMapper":
        features = []
        for item in d["features"]:
            if item["kind"] == NUMERIC:
                features.append(
                    FeatureBins(NUMERIC, upper_edges=np.array(item["upper_edges"]))
                )
            else:
                features.append(
                    FeatureBins(CATEGORICAL, categories=np.array(item["categories"]))
                )
        return cls(features, d["max_bins"])


def _distinct_sorted(sorted_col: np.ndarray) -> np.ndarray:
    if sorted_col.size == 0:
        return sorted_col
    keep = np.empty(sorted_col.size, dtype=bool)
    keep[0] = True
    np.not_equal(sorted_col[1:], sorted_col[:-1], out=keep[1:])
    return sorted_col[keep]


def _numeric_bins(sorted_col: np.ndarray, max_bins: int) -> FeatureBins:
    distinct = _distinct_sorted(sorted_col)
    if distinct.size <= 1:
        return FeatureBins(NUMERIC, upper_edges=np.empty(0))
    if distinct.size <= max_bins:
        edges = (distinct[:-1] + distinct[1:]) / 2.0
        # Midpoints of adjacent near-equal floats can collide; keep them unique.
        edges = np.unique(edges)
        return FeatureBins(NUMERIC, upper_edges=edges)
    n = sorted_col.size
    positions = (np.arange(1, max_bins) * n) // max_bins
    edges = np.unique(sorted_col[positions])
    return FeatureBins(NUMERIC, upper_edges=edges)


def build_bins(
    x: np.ndarray,
    max_bins: int = MAX_BINS_LIMIT,
    categorical_features: Sequence[int] = (),
) -> BinMapper:
    """Fit binning rules on a feature table (rows x features).

    Numeric features with at most ``max_bins`` distinct values get one bin
    per value; denser features get quantile bins. Constant features end up
    with a single bin and can never split.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("feature table must be 2-D with at least one row")
    if not 2 <= max_bins <= MAX_BINS_LIMIT:
        raise ValueError(f"max_bins must be in [2, {MAX_BINS_LIMIT}]")
    categorical = set(int(c) for c in categorical_features)
    sorted_xt = np.sort(np.ascontiguousarray(x.T), axis=1)
    features: list[FeatureBins] = []
    for f in range(x.shape[1]):
        col = sorted_xt[f]
        if f in categorical:
            cats = _distinct_sorted(col)
            if cats.size > MAX_BINS_LIMIT:
                raise ValueError(f"feature {f}: too many categories ({cats.size})")
            features.append(FeatureBins(CATEGORICAL, categories=cats.copy()))
        else:
            features.append(_numeric_bins(col, max_bins))
    return BinMapper(features, max_bins)
