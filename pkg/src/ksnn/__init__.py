"""k safest nearby neighbor (kSNN) queries on road networks."""

from .cttree import CtTree, ct_ksnn
from .cttree import build as build_ct_tree
from .graph import (DomainError, Edge, EdgeChange, KsnnError, PoiChange,
                    RoadGraph, SearchPath, apply_change, compare_safety, concat,
                    min_ess, pss, s_distance)
from .ine import ine_ksnn, safest_valid_path
from .oracle import brute_ksnn
from .query import Answer, AnswerEntry, QuerySpec, SearchBudgetExceeded, SearchStats
from .rtree import PoiSpatialIndex, build_rtree, rtree_ksnn
from .snvd import SNVD, build_snvd, snvd_ksnn, update_snvd

__all__ = [
    "Answer", "AnswerEntry", "CtTree", "DomainError", "Edge", "EdgeChange", "KsnnError",
    "PoiChange", "PoiSpatialIndex", "QuerySpec", "RoadGraph", "SNVD", "SearchBudgetExceeded",
    "SearchPath", "SearchStats", "apply_change", "brute_ksnn", "build_ct_tree",
    "build_rtree", "build_snvd", "compare_safety", "concat", "ct_ksnn", "ine_ksnn",
    "min_ess", "pss", "rtree_ksnn", "s_distance", "safest_valid_path", "snvd_ksnn",
    "update_snvd",
]
