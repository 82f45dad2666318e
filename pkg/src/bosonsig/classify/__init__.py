"""Clouds over unitary ensembles and the classifiers that separate them."""
from .analyses import (
    PAIRINGS,
    ImportanceResult,
    MisassignmentRow,
    TransitionRow,
    hist_overlap,
    importance_from_clouds,
    importance_levels,
    misassignment_curve,
    parse_grid,
    photon_paths,
    plane_similarity,
    rank_trends,
    transition_analysis,
)
from .classifiers import (
    KNearest,
    LinearSVM,
    NearestCentroid,
    Standardizer,
    error_probability,
    misassignment_rate,
    tune_k,
)
from .clouds import Cloud, generate_cloud, stack
from .ensembles import Ensemble, check_layout_for, parse_ensemble
from .forest import DecisionTree, RandomForest, rank_of

MODEL_KINDS = {cls.kind: cls for cls in (NearestCentroid, KNearest, LinearSVM, RandomForest)}

__all__ = [
    "MODEL_KINDS",
    "PAIRINGS",
    "Cloud",
    "DecisionTree",
    "Ensemble",
    "ImportanceResult",
    "KNearest",
    "LinearSVM",
    "MisassignmentRow",
    "NearestCentroid",
    "RandomForest",
    "Standardizer",
    "TransitionRow",
    "check_layout_for",
    "error_probability",
    "generate_cloud",
    "hist_overlap",
    "importance_from_clouds",
    "importance_levels",
    "misassignment_curve",
    "misassignment_rate",
    "parse_ensemble",
    "parse_grid",
    "photon_paths",
    "plane_similarity",
    "rank_of",
    "rank_trends",
    "stack",
    "transition_analysis",
    "tune_k",
]
