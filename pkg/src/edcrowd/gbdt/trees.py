"""Leaf-wise decision-tree growth on binned data.

Trees grow by repeatedly splitting the leaf whose best candidate split has
the highest gain, until the leaf budget is reached or no candidate improves
the loss. Child histograms are built for the smaller child only; the larger
child reuses the parent's buffers via subtraction.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .binning import CATEGORICAL, NUMERIC, BinMapper


@dataclass
class TreeNode:
    """One node of a grown tree.

    Internal nodes carry the split definition in both bin space
    (``bin_threshold`` / ``left_codes``) and raw-value space (``threshold`` /
    ``left_values``); the two are equivalent by construction. ``cover`` is
    the (weighted) hessian mass of the training rows that reached the node.
    """

    cover: float
    n_samples: int
    value: float = float("nan")
    feature: int = -1
    kind: str = ""
    bin_threshold: int = -1
    threshold: float = float("nan")
    left_codes: Optional[np.ndarray] = None
    left_values: Optional[np.ndarray] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves() + self.right.n_leaves()


@dataclass(frozen=True)
class SplitInfo:
    """A candidate split of one leaf."""

    feature: int
    kind: str
    gain: float
    bin_threshold: int = -1
    left_codes: Optional[np.ndarray] = None
    g_left: float = 0.0
    h_left: float = 0.0
    c_left: int = 0


class HistogramPool:
    """Recycles histogram buffers to avoid re-faulting fresh pages.

    Freshly allocated buffers pay a page fault per touched 4 KiB on first
    write, which dominates small-leaf histogram builds; reused buffers are
    just memset.
    """

    def __init__(self, total_bins: int):
        self.total_bins = total_bins
        self._free: list[np.ndarray] = []

    def acquire(self) -> np.ndarray:
        if self._free:
            buf = self._free.pop()
            buf[:] = 0.0
            return buf
        return np.zeros((3, self.total_bins), dtype=np.float64)

    def release(self, buf: np.ndarray) -> None:
        self._free.append(buf)


@dataclass
class NodeHistogram:
    """Per-bin gradient/hessian/count sums of the rows at one node.

    ``hist`` stacks the three planes as a (3, total_bins) float64 array;
    counts are exact integer-valued floats.
    """

    mapper: BinMapper
    hist: np.ndarray
    g_sum: float
    h_sum: float
    c_sum: int

    @classmethod
    def from_rows(
        cls,
        codes: np.ndarray,
        mapper: BinMapper,
        rows: np.ndarray,
        g: np.ndarray,
        h: np.ndarray,
        pool: Optional[HistogramPool] = None,
    ) -> "NodeHistogram":
        """Build from scratch for ``rows``; ``g``/``h`` are indexed by row id."""
        g_sub = np.ascontiguousarray(g[rows])
        h_sub = np.ascontiguousarray(h[rows])
        if pool is not None:
            hist = pool.acquire()
        else:
            hist = np.zeros((3, mapper.total_bins), dtype=np.float64)
        _kernels.build_histograms(codes, mapper.bin_offsets, rows, g_sub, h_sub, hist)
        return cls(
            mapper, hist, float(g_sub.sum()), float(h_sub.sum()), int(rows.size)
        )

    def subtract(self, child: "NodeHistogram") -> "NodeHistogram":
        """Histogram of the sibling: this node's bins minus the child's."""
        return NodeHistogram(
            self.mapper,
            self.hist - child.hist,
            self.g_sum - child.g_sum,
            self.h_sum - child.h_sum,
            self.c_sum - child.c_sum,
        )

    def subtract_in_place(self, child: "NodeHistogram") -> "NodeHistogram":
        """Like :meth:`subtract`, but reuses this node's buffer.

        The parent histogram is consumed: after the call this object and the
        returned sibling histogram share storage.
        """
        self.hist -= child.hist
        return NodeHistogram(
            self.mapper,
            self.hist,
            self.g_sum - child.g_sum,
            self.h_sum - child.h_sum,
            self.c_sum - child.c_sum,
        )

    def feature_slice(self, f: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = self.mapper.bin_offsets[f], self.mapper.bin_offsets[f + 1]
        return self.hist[0, lo:hi], self.hist[1, lo:hi], self.hist[2, lo:hi]


@dataclass(frozen=True)
class SplitAudit:
    """Snapshot of one realized split, for consistency checks."""

    feature: int
    kind: str
    gain: float
    parent: tuple[np.ndarray, np.ndarray, np.ndarray]
    left: tuple[np.ndarray, np.ndarray, np.ndarray]
    right: tuple[np.ndarray, np.ndarray, np.ndarray]
    parent_sums: tuple[float, float, int]


def _planes(hist: NodeHistogram) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return hist.hist[0].copy(), hist.hist[1].copy(), hist.hist[2].copy()


def find_best_split(hist: NodeHistogram, config) -> Optional[SplitInfo]:
    """Highest-gain split of a leaf, or None when no split improves the loss.

    Numeric thresholds are scanned per bin; categorical features are scanned
    as prefixes of their bins ordered by gradient/hessian ratio. Both sides
    of a candidate must keep at least ``min_data_in_leaf`` rows. Ties keep
    the first numeric candidate in (feature, bin) order; a categorical
    candidate replaces it only on strictly higher gain.
    """
    if hist.c_sum < 2 * config.min_data_in_leaf:
        return None
    lam = config.lambda_l2
    skip = hist.mapper.is_categorical.view(np.uint8)
    f, b, gain = _kernels.scan_numeric_splits(
        hist.hist, hist.mapper.bin_offsets, skip,
        hist.g_sum, hist.h_sum, float(hist.c_sum), config.min_data_in_leaf, lam,
    )
    best: Optional[SplitInfo] = None
    if f >= 0:
        sl_g, sl_h, sl_c = hist.feature_slice(f)
        best = SplitInfo(
            feature=int(f),
            kind=NUMERIC,
            gain=float(gain),
            bin_threshold=int(b),
            g_left=float(sl_g[: b + 1].sum()),
            h_left=float(sl_h[: b + 1].sum()),
            c_left=int(sl_c[: b + 1].sum()),
        )
    for f in np.nonzero(hist.mapper.is_categorical)[0]:
        lo, hi = hist.mapper.bin_offsets[f], hist.mapper.bin_offsets[f + 1]
        sorted_codes = np.empty(hi - lo, dtype=np.int64)
        prefix, gain = _kernels.scan_categorical_split(
            hist.hist, lo, hi, hist.g_sum, hist.h_sum, float(hist.c_sum),
            config.min_data_in_leaf, lam, sorted_codes,
        )
        if prefix > 0 and (best is None or gain > best.gain):
            left_codes = np.sort(sorted_codes[:prefix]).astype(np.uint8)
            sl_g, sl_h, sl_c = hist.feature_slice(int(f))
            best = SplitInfo(
                feature=int(f),
                kind=CATEGORICAL,
                gain=float(gain),
                left_codes=left_codes,
                g_left=float(sl_g[left_codes].sum()),
                h_left=float(sl_h[left_codes].sum()),
                c_left=int(sl_c[left_codes].sum()),
            )
    return best


@dataclass
class _Growing:
    """A leaf still eligible for splitting during growth."""

    node: TreeNode
    rows: np.ndarray
    hist: Optional[NodeHistogram]
    split: Optional[SplitInfo] = None
    done: bool = False


def _partition(codes: np.ndarray, rows: np.ndarray, split: SplitInfo):
    feature_codes = codes[split.feature][rows]
    if split.kind == NUMERIC:
        mask = feature_codes <= split.bin_threshold
    else:
        lut = np.zeros(256, dtype=bool)
        lut[split.left_codes] = True
        mask = lut[feature_codes]
    return rows[mask], rows[~mask]


def grow_tree(
    codes: np.ndarray,
    mapper: BinMapper,
    g: np.ndarray,
    h: np.ndarray,
    config,
    audit: Optional[list] = None,
    pool: Optional[HistogramPool] = None,
) -> TreeNode:
    """Grow one tree on binned rows (codes is feature-major over the rows).

    ``g`` and ``h`` are the (weighted) gradients/hessians of the rows, in
    row order. Growth is best-gain-first across all current leaves; gain
    ties split the leaf that became a candidate first.
    """
    n = codes.shape[1]
    rows = np.arange(n, dtype=np.int64)
    hist = NodeHistogram.from_rows(codes, mapper, rows, g, h, pool)
    root = TreeNode(cover=hist.h_sum, n_samples=n)
    growing = [_Growing(root, rows, hist)]

    heap: list[tuple[float, int, _Growing]] = []
    counter = 0

    def push(gl: _Growing) -> None:
        nonlocal counter
        gl.split = find_best_split(gl.hist, config)
        if gl.split is not None and gl.split.gain > 0.0:
            heapq.heappush(heap, (-gl.split.gain, counter, gl))
            counter += 1

    push(growing[0])
    n_leaves = 1
    lam = config.lambda_l2

    while n_leaves < config.num_leaves and heap:
        _, _, gl = heapq.heappop(heap)
        split = gl.split
        rows_l, rows_r = _partition(codes, gl.rows, split)

        parent_snapshot = None
        if audit is not None:
            parent_snapshot = _planes(gl.hist)
            parent_sums = (gl.hist.g_sum, gl.hist.h_sum, gl.hist.c_sum)

        smaller_rows = rows_l if rows_l.size <= rows_r.size else rows_r
        hist_small = NodeHistogram.from_rows(
            codes, mapper, smaller_rows, g, h, pool
        )
        # The parent's buffer is recycled as the sibling's histogram.
        hist_large = gl.hist.subtract_in_place(hist_small)
        if smaller_rows is rows_l:
            hist_l, hist_r = hist_small, hist_large
        else:
            hist_l, hist_r = hist_large, hist_small

        if audit is not None:
            audit.append(
                SplitAudit(
                    feature=split.feature,
                    kind=split.kind,
                    gain=split.gain,
                    parent=parent_snapshot,
                    left=_planes(hist_l),
                    right=_planes(hist_r),
                    parent_sums=parent_sums,
                )
            )

        node = gl.node
        node.feature = split.feature
        node.kind = split.kind
        node.gain = split.gain
        if split.kind == NUMERIC:
            node.bin_threshold = split.bin_threshold
            node.threshold = float(
                mapper.features[split.feature].upper_edges[split.bin_threshold]
            )
        else:
            node.left_codes = split.left_codes
            node.left_values = mapper.features[split.feature].categories[
                split.left_codes
            ]
        node.left = TreeNode(cover=hist_l.h_sum, n_samples=int(rows_l.size))
        node.right = TreeNode(cover=hist_r.h_sum, n_samples=int(rows_r.size))

        gl.done = True
        gl.hist = None  # buffer now owned by the larger child
        left_gl = _Growing(node.left, rows_l, hist_l)
        right_gl = _Growing(node.right, rows_r, hist_r)
        growing.extend((left_gl, right_gl))
        push(left_gl)
        push(right_gl)
        n_leaves += 1

    for gl in growing:
        if not gl.done:
            node = gl.node
            node.value = -gl.hist.g_sum / (gl.hist.h_sum + lam)
            gl.hist = None
    return root
