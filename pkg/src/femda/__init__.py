"""Robust discriminant analysis with the FEMDA rule and its baselines."""

from .classifiers import (
    FEMDA,
    GQDA,
    METHODS,
    QDA,
    RGQDA,
    TQDA,
    TrainedModel,
    TrainSettings,
    accuracy,
    classify,
    train,
)
from .contamination import ContaminationSpec, contaminate
from .datasets import LabeledDataset, load_bundled, load_csv, preprocess, stratified_split
from .distributions import ScenarioConfig, generate_scenario
from .estimators import ClusterParams, estimate_gaussian, femda_fixed_point, robust_plugin, student_em
from .linalg import SPDMatrix

__version__ = "0.1.0"

__all__ = [
    "FEMDA", "GQDA", "METHODS", "QDA", "RGQDA", "TQDA",
    "TrainedModel", "TrainSettings", "accuracy", "classify", "train",
    "ContaminationSpec", "contaminate",
    "LabeledDataset", "load_bundled", "load_csv", "preprocess", "stratified_split",
    "ScenarioConfig", "generate_scenario",
    "ClusterParams", "estimate_gaussian", "femda_fixed_point", "robust_plugin", "student_em",
    "SPDMatrix",
]
