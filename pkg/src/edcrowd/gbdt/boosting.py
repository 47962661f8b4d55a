"""Gradient boosting of binned decision trees for binary classification.

Each iteration computes log-loss gradients at the current scores, optionally
subsamples rows by gradient magnitude (all large-gradient rows are kept,
small-gradient rows are sampled with compensating weights), grows one
leaf-wise tree and adds it with a fixed learning rate. The raw model output
is ``base_score + learning_rate * sum(tree outputs)``; probabilities are its
sigmoid.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .binning import CATEGORICAL, NUMERIC, BinMapper, FeatureBins, build_bins
from .trees import TreeNode, grow_tree

FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyperparameters.

    ``goss_top_rate`` / ``goss_other_rate`` are the kept fraction of
    large-gradient rows and the sampled fraction of the rest; setting them
    to 1.0 / 0.0 disables sampling. ``positive_class_weight`` scales the
    loss of positive rows (1.0 keeps the loss unweighted).
    """

    num_trees: int = 100
    num_leaves: int = 31
    learning_rate: float = 0.1
    max_bins: int = 255
    min_data_in_leaf: int = 20
    goss_top_rate: float = 0.2
    goss_other_rate: float = 0.1
    lambda_l2: float = 1e-3
    categorical_features: tuple[int, ...] = ()
    positive_class_weight: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_trees < 0:
            raise ValueError("num_trees must be >= 0")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 2 <= self.max_bins <= 255:
            raise ValueError("max_bins must be in [2, 255]")
        if self.min_data_in_leaf < 1:
            raise ValueError("min_data_in_leaf must be >= 1")
        a, b = self.goss_top_rate, self.goss_other_rate
        if a < 0 or b < 0 or not 0 < a + b <= 1:
            raise ValueError("goss rates must satisfy 0 < top + other <= 1")
        if not self.lambda_l2 >= 0:
            raise ValueError("lambda_l2 must be >= 0")
        if not self.positive_class_weight > 0:
            raise ValueError("positive_class_weight must be positive")
        object.__setattr__(
            self, "categorical_features", tuple(int(c) for c in self.categorical_features)
        )


def goss_sample(
    gradients: np.ndarray,
    top_rate: float,
    other_rate: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient-based one-side sampling.

    Keeps the ``top_rate`` fraction of rows with the largest |gradient| at
    weight 1 and samples ``other_rate * n`` of the remaining rows uniformly,
    weighted by ``(1 - top_rate) / other_rate`` to keep gradient sums
    unbiased. Ties in |gradient| are broken by row index; when both counts
    round down to zero the single largest-|gradient| row is kept. Returns
    row indices in ascending order and the weight multiplier per selected
    row.
    """
    if top_rate < 0 or other_rate < 0 or not 0 < top_rate + other_rate <= 1:
        raise ValueError("goss rates must satisfy 0 < top + other <= 1")
    n = gradients.size
    top_n = int(top_rate * n)
    other_n = int(other_rate * n)
    if top_n == 0 and other_n == 0:
        top_n = 1
    order = np.argsort(-np.abs(gradients), kind="stable")
    top_set = order[:top_n]
    rest = order[top_n:]
    if other_n > 0 and rest.size > 0:
        other_n = min(other_n, rest.size)
        sampled = rng.choice(rest, size=other_n, replace=False)
    else:
        sampled = np.empty(0, dtype=np.int64)
    weights_full = np.zeros(n, dtype=np.float64)
    weights_full[top_set] = 1.0
    if sampled.size:
        weights_full[sampled] = (1.0 - top_rate) / other_rate
    selected = np.sort(np.concatenate([top_set, sampled])).astype(np.int64)
    if selected.size == 0:
        raise ValueError("goss sampling selected no rows")
    return selected, weights_full[selected]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class _FlatForest:
    """Array form of the trees for the numba descent kernels."""

    __slots__ = (
        "tree_offsets", "feature", "is_cat", "thr_bin", "cat_bits",
        "left", "right", "value", "is_leaf", "cover",
    )

    def __init__(self, trees: Sequence[TreeNode]):
        nodes: list[TreeNode] = []
        offsets = [0]
        children: list[tuple[int, int]] = []
        for tree in trees:
            base = len(nodes)
            stack = [tree]
            order: list[TreeNode] = []
            while stack:
                node = stack.pop()
                order.append(node)
                if not node.is_leaf:
                    stack.append(node.right)
                    stack.append(node.left)
            index = {id(n): base + i for i, n in enumerate(order)}
            for n in order:
                nodes.append(n)
                if n.is_leaf:
                    children.append((-1, -1))
                else:
                    children.append((index[id(n.left)], index[id(n.right)]))
            offsets.append(len(nodes))

        n_nodes = len(nodes)
        self.tree_offsets = np.array(offsets, dtype=np.int64)
        self.feature = np.array([n.feature for n in nodes], dtype=np.int64)
        self.is_cat = np.array(
            [1 if n.kind == CATEGORICAL else 0 for n in nodes], dtype=np.uint8
        )
        self.thr_bin = np.array(
            [n.bin_threshold if not n.is_leaf else -1 for n in nodes], dtype=np.int64
        )
        self.cat_bits = np.zeros((max(n_nodes, 1), 4), dtype=np.uint64)
        for i, n in enumerate(nodes):
            if not n.is_leaf and n.kind == CATEGORICAL:
                for c in n.left_codes:
                    self.cat_bits[i, c >> 6] |= np.uint64(1) << np.uint64(c & 63)
        self.left = np.array([c[0] for c in children], dtype=np.int64)
        self.right = np.array([c[1] for c in children], dtype=np.int64)
        self.value = np.array(
            [n.value if n.is_leaf else 0.0 for n in nodes], dtype=np.float64
        )
        self.is_leaf = np.array([1 if n.is_leaf else 0 for n in nodes], dtype=np.uint8)
        self.cover = np.array([n.cover for n in nodes], dtype=np.float64)


class Ensemble:
    """A fitted boosted-tree model."""

    def __init__(
        self,
        base_score: float,
        trees: Sequence[TreeNode],
        learning_rate: float,
        mapper: BinMapper,
        config: TrainConfig,
    ):
        self.base_score = float(base_score)
        self.trees = list(trees)
        self.learning_rate = float(learning_rate)
        self.mapper = mapper
        self.config = config
        self._flat: Optional[_FlatForest] = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.mapper.n_features

    def flat(self) -> _FlatForest:
        if self._flat is None:
            self._flat = _FlatForest(self.trees)
        return self._flat

    def _check_width(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.shape[1] != self.n_features:
            raise ValueError(
                f"feature width mismatch: model expects {self.n_features}, got {x.shape[1]}"
            )
        return x

    def predict_raw(self, x: np.ndarray) -> np.ndarray:
        """Log-odds output per row."""
        x = self._check_width(x)
        codes = self.mapper.transform(x)
        out = np.empty(x.shape[0], dtype=np.float64)
        fl = self.flat()
        _kernels.predict_raw_forest(
            codes, fl.tree_offsets, fl.feature, fl.is_cat, fl.thr_bin, fl.cat_bits,
            fl.left, fl.right, fl.value, fl.is_leaf,
            self.base_score, self.learning_rate, out,
        )
        return out

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Crowding probability per row, in (0, 1)."""
        return _sigmoid(self.predict_raw(x))

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model": "edcrowd-gbdt",
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "config": asdict(self.config),
            "bins": self.mapper.to_dict(),
            "trees": [_node_to_dict(t) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version: {d.get('format_version')}")
        config_d = dict(d["config"])
        config_d["categorical_features"] = tuple(config_d["categorical_features"])
        config = TrainConfig(**config_d)
        mapper = BinMapper.from_dict(d["bins"])
        trees = [_node_from_dict(t, mapper) for t in d["trees"]]
        return cls(d["base_score"], trees, d["learning_rate"], mapper, config)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "Ensemble":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {
            "value": node.value,
            "cover": node.cover,
            "n_samples": node.n_samples,
        }
    d = {
        "feature": node.feature,
        "kind": node.kind,
        "gain": node.gain,
        "cover": node.cover,
        "n_samples": node.n_samples,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }
    if node.kind == NUMERIC:
        d["threshold"] = node.threshold
    else:
        d["left_values"] = node.left_values.tolist()
    return d


def _node_from_dict(d: dict, mapper: BinMapper) -> TreeNode:
    if "feature" not in d:
        return TreeNode(cover=d["cover"], n_samples=d["n_samples"], value=d["value"])
    node = TreeNode(cover=d["cover"], n_samples=d["n_samples"])
    node.feature = int(d["feature"])
    node.kind = d["kind"]
    node.gain = float(d["gain"])
    fb: FeatureBins = mapper.features[node.feature]
    if node.kind == NUMERIC:
        node.threshold = float(d["threshold"])
        node.bin_threshold = int(
            np.searchsorted(fb.upper_edges, node.threshold, side="left")
        )
    else:
        node.left_values = np.asarray(d["left_values"], dtype=np.float64)
        node.left_codes = np.searchsorted(fb.categories, node.left_values).astype(np.uint8)
    node.left = _node_from_dict(d["left"], mapper)
    node.right = _node_from_dict(d["right"], mapper)
    return node


def fit(
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig = TrainConfig(),
    audit: Optional[list] = None,
) -> Ensemble:
    """Fit a boosted-tree binary classifier.

    ``y`` must contain both classes. The base score is the log-odds of the
    (weighted) training prevalence. Deterministic for fixed inputs and
    ``config.seed``. When ``audit`` is a list, every realized split appends
    a :class:`~edcrowd.gbdt.trees.SplitAudit` record.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("feature table must be 2-D")
    # Cheap one-pass screen; the exact check only runs when it trips.
    if not math.isfinite(float(x.sum())) and not np.isfinite(x).all():
        raise ValueError("feature table contains non-finite values")
    y = np.asarray(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError("feature table and labels disagree on row count")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    y = y.astype(np.float64)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise ValueError("degenerate labels: need at least one row of each class")

    w0 = np.where(y == 1.0, config.positive_class_weight, 1.0)
    p_bar = float((w0 * y).sum() / w0.sum())
    base_score = math.log(p_bar / (1.0 - p_bar))

    mapper = build_bins(x, config.max_bins, config.categorical_features)
    codes = mapper.transform(x)
    n = x.shape[0]
    scores = np.full(n, base_score, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    full_sample = config.goss_top_rate >= 1.0
    all_rows = np.arange(n, dtype=np.int64)

    trees: list[TreeNode] = []
    for _ in range(config.num_trees):
        p = _sigmoid(scores)
        g = (p - y) * w0
        h = p * (1.0 - p) * w0
        if full_sample:
            codes_sub, g_s, h_s = codes, g, h
        else:
            sel, mult = goss_sample(g, config.goss_top_rate, config.goss_other_rate, rng)
            # Compact row gather keeps the histogram kernel cache-friendly.
            codes_sub = codes.take(sel, axis=1)
            g_s = g[sel] * mult
            h_s = h[sel] * mult
        tree = grow_tree(codes_sub, mapper, g_s, h_s, config, audit)
        if tree.is_leaf:
            break  # no splittable structure left; a bare leaf only adds noise
        trees.append(tree)
        contrib = np.zeros(n, dtype=np.float64)
        fl = _FlatForest([tree])
        _kernels.apply_tree(
            codes, all_rows, fl.feature, fl.is_cat, fl.thr_bin, fl.cat_bits,
            fl.left, fl.right, fl.value, fl.is_leaf, contrib,
        )
        scores += config.learning_rate * contrib

    return Ensemble(base_score, trees, config.learning_rate, mapper, config)
