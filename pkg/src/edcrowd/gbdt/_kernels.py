"""Numba kernels for histogram construction, split search and tree descent.

Histograms are one (3, total_bins) array - gradient, hessian and count
planes - indexed by ``bin_offsets[f] + code``. Counts are stored as float64
(exact for any realistic row count). All loops are sequential so results
are bit-for-bit reproducible regardless of thread settings.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def build_histograms(codes, bin_offsets, rows, g, h, hist):
    """Accumulate gradient/hessian/count histograms for the given rows.

    ``codes`` is feature-major; ``g`` and ``h`` are pre-gathered in row
    order (aligned with ``rows``), so the inner loop streams them
    sequentially and only the code lookup gathers.
    """
    n_features = codes.shape[0]
    n = rows.size
    hist_g = hist[0]
    hist_h = hist[1]
    hist_c = hist[2]
    for f in range(n_features):
        base = bin_offsets[f]
        feature_codes = codes[f]
        for k in range(n):
            b = base + feature_codes[rows[k]]
            hist_g[b] += g[k]
            hist_h[b] += h[k]
            hist_c[b] += 1.0


@njit(cache=True)
def scan_numeric_splits(
    hist, bin_offsets, skip_feature, g_sum, h_sum, c_sum, min_data_in_leaf, lam
):
    """Best threshold split over all numeric features of one leaf.

    Gain is measured against keeping the leaf whole. Ties keep the first
    candidate in (feature, bin) scan order. Returns (feature, bin, gain);
    feature is -1 when no candidate clears zero gain.
    """
    hist_g = hist[0]
    hist_h = hist[1]
    hist_c = hist[2]
    best_gain = 0.0
    best_f = -1
    best_bin = -1
    parent_score = g_sum * g_sum / (h_sum + lam)
    min_data = float(min_data_in_leaf)
    n_features = bin_offsets.size - 1
    for f in range(n_features):
        if skip_feature[f]:
            continue
        lo = bin_offsets[f]
        hi = bin_offsets[f + 1]
        g_left = 0.0
        h_left = 0.0
        c_left = 0.0
        for b in range(lo, hi - 1):
            g_left += hist_g[b]
            h_left += hist_h[b]
            c_left += hist_c[b]
            if c_left < min_data:
                continue
            c_right = c_sum - c_left
            if c_right < min_data:
                break
            g_right = g_sum - g_left
            h_right = h_sum - h_left
            gain = (
                g_left * g_left / (h_left + lam)
                + g_right * g_right / (h_right + lam)
                - parent_score
            )
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_bin = b - lo
    return best_f, best_bin, best_gain


@njit(cache=True)
def scan_categorical_split(
    hist, lo, hi, g_sum, h_sum, c_sum, min_data_in_leaf, lam, sorted_codes_out
):
    """Best prefix split of one categorical feature's histogram slice.

    Non-empty category bins are ordered by gradient/hessian ratio (ties by
    code) and prefixes of that order are scanned as left-branch candidates.
    Writes the ordering into ``sorted_codes_out`` and returns
    (prefix_length, gain); prefix_length is 0 when nothing clears zero gain.
    """
    hist_g = hist[0]
    hist_h = hist[1]
    hist_c = hist[2]
    n_bins = hi - lo
    ratios = np.empty(n_bins, dtype=np.float64)
    order = np.empty(n_bins, dtype=np.int64)
    m = 0
    for b in range(n_bins):
        if hist_c[lo + b] > 0:
            ratios[m] = hist_g[lo + b] / (hist_h[lo + b] + lam)
            order[m] = b
            m += 1
    # Insertion sort by (ratio, code): stable and deterministic.
    for i in range(1, m):
        r = ratios[i]
        o = order[i]
        j = i - 1
        while j >= 0 and ratios[j] > r:
            ratios[j + 1] = ratios[j]
            order[j + 1] = order[j]
            j -= 1
        ratios[j + 1] = r
        order[j + 1] = o

    parent_score = g_sum * g_sum / (h_sum + lam)
    min_data = float(min_data_in_leaf)
    best_gain = 0.0
    best_prefix = 0
    g_left = 0.0
    h_left = 0.0
    c_left = 0.0
    for j in range(m - 1):
        b = lo + order[j]
        g_left += hist_g[b]
        h_left += hist_h[b]
        c_left += hist_c[b]
        if c_left < min_data:
            continue
        c_right = c_sum - c_left
        if c_right < min_data:
            break
        g_right = g_sum - g_left
        h_right = h_sum - h_left
        gain = (
            g_left * g_left / (h_left + lam)
            + g_right * g_right / (h_right + lam)
            - parent_score
        )
        if gain > best_gain:
            best_gain = gain
            best_prefix = j + 1
    for j in range(m):
        sorted_codes_out[j] = order[j]
    return best_prefix, best_gain


@njit(cache=True)
def apply_tree(
    codes, rows, node_feature, node_is_cat, node_thr_bin, node_cat_bits,
    node_left, node_right, node_value, node_is_leaf, out,
):
    """Descend one flattened tree for the given rows; adds leaf values to out."""
    for k in range(rows.size):
        i = rows[k]
        node = 0
        while not node_is_leaf[node]:
            f = node_feature[node]
            c = np.int64(codes[f, i])
            if node_is_cat[node]:
                go_left = (node_cat_bits[node, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)
            else:
                go_left = c <= node_thr_bin[node]
            node = node_left[node] if go_left else node_right[node]
        out[i] += node_value[node]


@njit(cache=True)
def predict_raw_forest(
    codes, tree_offsets, node_feature, node_is_cat, node_thr_bin, node_cat_bits,
    node_left, node_right, node_value, node_is_leaf, base_score, learning_rate, out,
):
    """Raw (log-odds) forest output: base + lr * sum of per-tree leaf values."""
    n = codes.shape[1]
    n_trees = tree_offsets.size - 1
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = tree_offsets[t]
            while not node_is_leaf[node]:
                f = node_feature[node]
                c = np.int64(codes[f, i])
                if node_is_cat[node]:
                    go_left = (node_cat_bits[node, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)
                else:
                    go_left = c <= node_thr_bin[node]
                node = node_left[node] if go_left else node_right[node]
            acc += node_value[node]
        out[i] = base_score + learning_rate * acc
