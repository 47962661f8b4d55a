"""From-scratch histogram gradient-boosted trees for binary classification."""

from .binning import BinMapper, FeatureBins, build_bins
from .boosting import Ensemble, TrainConfig, fit, goss_sample
from .trees import NodeHistogram, SplitInfo, TreeNode, find_best_split, grow_tree

__all__ = [
    "BinMapper",
    "Ensemble",
    "FeatureBins",
    "NodeHistogram",
    "SplitInfo",
    "TrainConfig",
    "TreeNode",
    "build_bins",
    "find_best_split",
    "fit",
    "goss_sample",
    "grow_tree",
]
