"""Shapley attribution of model output to features.

Two evaluators are provided. :func:`shapley_exact` applies the defining
subset sum to an arbitrary value function and is exponential in the number
of features. :func:`tree_shap` computes the same quantity for a boosted-tree
model in polynomial time, with the value of a feature subset defined as the
conditional expectation obtained by descending each tree: features in the
subset follow the row's branch, absent features average the children
weighted by training cover. The two agree to float precision, and the
brute-force route is the test oracle for the fast one.

Attributions are in raw (log-odds) units, so the base value plus the sum of
contributions equals the model's raw output exactly (local accuracy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .features import FeatureLayout
from .gbdt.binning import CATEGORICAL
from .gbdt.boosting import Ensemble
from .gbdt.trees import TreeNode

MAX_EXACT_FEATURES = 12


def shapley_exact(
    value_function: Callable[[tuple[int, ...]], float], n_features: int
) -> np.ndarray:
    """Shapley values by full subset enumeration.

    ``value_function`` receives a sorted tuple of feature ids (the subset)
    and must be defined for all 2**n subsets. Each feature's value is its
    marginal contribution averaged over all subsets of the others, weighted
    by |S|! (n - |S| - 1)! / n!.
    """
    if n_features > MAX_EXACT_FEATURES:
        raise ValueError(
            f"use tree_shap: exact enumeration is limited to {MAX_EXACT_FEATURES} features"
        )
    if n_features < 0:
        raise ValueError("n_features must be >= 0")
    values = {}
    for mask in range(1 << n_features):
        subset = tuple(i for i in range(n_features) if mask >> i & 1)
        values[mask] = float(value_function(subset))
    fact = [math.factorial(i) for i in range(n_features + 1)]
    denom = fact[n_features] if n_features else 1
    phi = np.zeros(n_features, dtype=np.float64)
    for i in range(n_features):
        bit = 1 << i
        for mask in range(1 << n_features):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            w = fact[s] * fact[n_features - s - 1] / denom
            phi[i] += w * (values[mask | bit] - values[mask])
    return phi


def cover_weighted_value(ensemble: Ensemble, row: np.ndarray) -> Callable[[tuple[int, ...]], float]:
    """The tree-descent value function v(S) used by both evaluators.

    Returns a callable mapping a feature subset to the ensemble's raw output
    with absent features integrated out along the trees' training covers.
    """
    row = np.asarray(row, dtype=np.float64).reshape(-1)
    if row.size != ensemble.n_features:
        raise ValueError(
            f"feature width mismatch: model expects {ensemble.n_features}, got {row.size}"
        )

    def walk(node: TreeNode, subset: frozenset) -> float:
        if node.is_leaf:
            return node.value
        if node.feature in subset:
            if node.kind == CATEGORICAL:
                go_left = bool(np.any(node.left_values == row[node.feature]))
            else:
                go_left = row[node.feature] <= node.threshold
            return walk(node.left if go_left else node.right, subset)
        c_left = node.left.cover
        c_right = node.right.cover
        total = c_left + c_right
        return (
            c_left * walk(node.left, subset) + c_right * walk(node.right, subset)
        ) / total

    def value(subset: tuple[int, ...]) -> float:
        fs = frozenset(subset)
        total = sum(walk(t, fs) for t in ensemble.trees)
        return ensemble.base_score + ensemble.learning_rate * total

    return value


@dataclass(frozen=True)
class Attribution:
    """Per-feature contributions for one row, in log-odds units."""

    base_value: float
    contributions: np.ndarray
    row: np.ndarray

    @property
    def raw_output(self) -> float:
        return float(self.base_value + self.contributions.sum())


class _ShapPlan:
    """Row-independent leaf/path tables extracted from an ensemble.

    For every leaf: the distinct features on its root path ("slots"), the
    cover fraction product per slot, and the branch tests that decide, per
    slot, whether the row follows the path. Only the test outcomes depend on
    the row, so per-row work is pure array arithmetic.
    """

    def __init__(self, ensemble: Ensemble):
        leaf_value: list[float] = []
        slot_start: list[int] = []
        slot_end: list[int] = []
        test_start: list[int] = []
        test_end: list[int] = []
        slot_feature: list[int] = []
        slot_z: list[float] = []
        t_feature: list[int] = []
        t_is_cat: list[int] = []
        t_thr: list[int] = []
        t_bits: list[np.ndarray] = []
        t_slot: list[int] = []
        t_go_left: list[int] = []
        expected = 0.0

        def descend(node: TreeNode, path: list) -> None:
            nonlocal expected
            if node.is_leaf:
                slot_start.append(len(slot_feature))
                test_start.append(len(t_feature))
                slots: dict[int, int] = {}
                z_prod: list[float] = []
                for feature, frac, test in path:
                    if feature not in slots:
                        slots[feature] = len(z_prod)
                        z_prod.append(1.0)
                    local = slots[feature]
                    z_prod[local] *= frac
                    t_feature.append(test[0])
                    t_is_cat.append(test[1])
                    t_thr.append(test[2])
                    t_bits.append(test[3])
                    t_go_left.append(test[4])
                    t_slot.append(local)
                slot_feature.extend(slots.keys())
                slot_z.extend(z_prod)
                slot_end.append(len(slot_feature))
                test_end.append(len(t_feature))
                leaf_value.append(node.value)
                expected += node.value * float(np.prod(z_prod))
                return
            c_left = node.left.cover
            c_right = node.right.cover
            total = c_left + c_right
            bits = np.zeros(4, dtype=np.uint64)
            thr = -1
            if node.kind == CATEGORICAL:
                for c in node.left_codes:
                    bits[c >> 6] |= np.uint64(1) << np.uint64(int(c) & 63)
                is_cat = 1
            else:
                thr = node.bin_threshold
                is_cat = 0
            path.append(
                (node.feature, c_left / total, (node.feature, is_cat, thr, bits, 1))
            )
            descend(node.left, path)
            path.pop()
            path.append(
                (node.feature, c_right / total, (node.feature, is_cat, thr, bits, 0))
            )
            descend(node.right, path)
            path.pop()

        for tree in ensemble.trees:
            descend(tree, [])

        n_leaves = len(leaf_value)
        self.leaf_value = np.array(leaf_value, dtype=np.float64)
        self.slot_start = np.array(slot_start, dtype=np.int64)
        self.slot_end = np.array(slot_end, dtype=np.int64)
        self.test_start = np.array(test_start, dtype=np.int64)
        self.test_end = np.array(test_end, dtype=np.int64)
        self.slot_feature = np.array(slot_feature, dtype=np.int64)
        self.slot_z = np.array(slot_z, dtype=np.float64)
        self.t_feature = np.array(t_feature, dtype=np.int64)
        self.t_is_cat = np.array(t_is_cat, dtype=np.uint8)
        self.t_thr = np.array(t_thr, dtype=np.int64)
        self.t_bits = (
            np.stack(t_bits) if t_bits else np.zeros((0, 4), dtype=np.uint64)
        )
        self.t_slot = np.array(t_slot, dtype=np.int64)
        self.t_go_left = np.array(t_go_left, dtype=np.uint8)
        self.expected_value = ensemble.base_score + ensemble.learning_rate * expected
        max_k = 0
        for i in range(n_leaves):
            max_k = max(max_k, int(self.slot_end[i] - self.slot_start[i]))
        self.max_k = max_k
        # Shapley kernel weights: weight[k, t] = t! (k-1-t)! / k!
        self.weights = np.zeros((max_k + 1, max_k + 1), dtype=np.float64)
        for k in range(1, max_k + 1):
            for t in range(k):
                self.weights[k, t] = (
                    math.factorial(t) * math.factorial(k - 1 - t) / math.factorial(k)
                )


@njit(cache=True)
def _shap_rows(
    codes, leaf_value, slot_start, slot_end, test_start, test_end,
    slot_feature, slot_z, t_feature, t_is_cat, t_thr, t_bits, t_slot, t_go_left,
    weights, learning_rate, max_k, phi,
):
    n_rows = codes.shape[1]
    n_leaves = leaf_value.size
    o_buf = np.empty(max_k + 1, dtype=np.float64)
    c_buf = np.empty(max_k + 2, dtype=np.float64)
    q_buf = np.empty(max_k + 1, dtype=np.float64)
    for i in range(n_rows):
        for leaf in range(n_leaves):
            s0 = slot_start[leaf]
            k = slot_end[leaf] - s0
            if k == 0:
                continue
            for s in range(k):
                o_buf[s] = 1.0
            for t in range(test_start[leaf], test_end[leaf]):
                c = np.int64(codes[t_feature[t], i])
                if t_is_cat[t]:
                    go_left = (t_bits[t, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)
                else:
                    go_left = c <= t_thr[t]
                if go_left != t_go_left[t]:
                    o_buf[t_slot[t]] = 0.0
            # coefficients of prod_s (z_s + o_s x)
            c_buf[0] = 1.0
            for s in range(k):
                z = slot_z[s0 + s]
                o = o_buf[s]
                c_buf[s + 1] = 0.0
                for j in range(s + 1, 0, -1):
                    c_buf[j] = c_buf[j] * z + c_buf[j - 1] * o
                c_buf[0] = c_buf[0] * z
            v = leaf_value[leaf]
            for s in range(k):
                z = slot_z[s0 + s]
                o = o_buf[s]
                # divide (z + o x) back out of the coefficients
                if o == 0.0:
                    for t in range(k):
                        q_buf[t] = c_buf[t] / z
                else:
                    q_buf[k - 1] = c_buf[k] / o
                    for t in range(k - 2, -1, -1):
                        q_buf[t] = (c_buf[t + 1] - z * q_buf[t + 1]) / o
                acc = 0.0
                for t in range(k):
                    acc += weights[k, t] * q_buf[t]
                phi[i, slot_feature[s0 + s]] += learning_rate * v * (o - z) * acc


def tree_shap_matrix(ensemble: Ensemble, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Contribution matrix (rows x features) and the shared base value."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != ensemble.n_features:
        raise ValueError(
            f"feature width mismatch: model expects {ensemble.n_features}, got {x.shape[1]}"
        )
    plan = _plan_for(ensemble)
    codes = ensemble.mapper.transform(x)
    phi = np.zeros((x.shape[0], ensemble.n_features), dtype=np.float64)
    if plan.leaf_value.size:
        _shap_rows(
            codes, plan.leaf_value, plan.slot_start, plan.slot_end,
            plan.test_start, plan.test_end, plan.slot_feature, plan.slot_z,
            plan.t_feature, plan.t_is_cat, plan.t_thr, plan.t_bits,
            plan.t_slot, plan.t_go_left, plan.weights,
            ensemble.learning_rate, plan.max_k, phi,
        )
    return phi, plan.expected_value


def tree_shap(ensemble: Ensemble, row: np.ndarray) -> Attribution:
    """Shapley attribution of one row's raw model output."""
    row = np.asarray(row, dtype=np.float64).reshape(-1)
    phi, base = tree_shap_matrix(ensemble, row.reshape(1, -1))
    return Attribution(base_value=base, contributions=phi[0], row=row)


_plans: dict[int, tuple[Ensemble, _ShapPlan]] = {}


def _plan_for(ensemble: Ensemble) -> _ShapPlan:
    key = id(ensemble)
    cached = _plans.get(key)
    if cached is not None and cached[0] is ensemble:
        return cached[1]
    plan = _ShapPlan(ensemble)
    _plans.clear()
    _plans[key] = (ensemble, plan)
    return plan


@dataclass(frozen=True)
class GroupImportance:
    """Mean absolute contribution per feature group, over a set of rows."""

    values: dict[str, float]
    n_rows: int

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(self.values.items(), key=lambda kv: -kv[1])


def group_importance(
    attributions: Sequence[Attribution] | np.ndarray,
    layout: FeatureLayout,
) -> GroupImportance:
    """Aggregate |contributions| into the layout's feature groups.

    Within each group the absolute contributions are summed per row, then
    averaged over rows. The label group is not a model feature and is
    excluded.
    """
    if isinstance(attributions, np.ndarray):
        phi = np.atleast_2d(np.asarray(attributions, dtype=np.float64))
    else:
        if not attributions:
            raise ValueError("need at least one attribution")
        phi = np.stack([a.contributions for a in attributions])
    if phi.shape[1] != layout.model_width():
        raise ValueError(
            f"attribution width {phi.shape[1]} does not match layout model width "
            f"{layout.model_width()}"
        )
    abs_phi = np.abs(phi)
    values = {
        name: float(abs_phi[:, cols].sum(axis=1).mean())
        for name, cols in layout.model_group_columns().items()
    }
    return GroupImportance(values=values, n_rows=phi.shape[0])
