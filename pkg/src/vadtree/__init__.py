"""Training-free video anomaly detection over a granularity-aware event tree."""

__version__ = "0.1.0"

from .boundary import (ConfidenceSequence, LocalWindow, PeakSet, assemble_global_sequence,
                       extract_peaks, plan_windows)
from .evaluation import average_precision, evaluate, roc_auc, sample_tw, sampling_metrics
from .fusion import cohesion, frames_from_nodes, fuse, fuse_tree, normalize_cohesion
from .refine import cosine_similarity, refine_cluster
from .scoring import NodeScoreRecord, parse_discrete_score, score_nodes
from .tree import (EventNode, GranularityTree, HGTree, build_hgtree, cluster_confidences,
                   complete, remove_dup, stratify, tree_init, verify_coverage)
