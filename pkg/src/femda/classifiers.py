"""Discriminant rules: QDA, t-QDA, GQDA/RGQDA and FEMDA.

All rules score every class and predict the argmin; ties go to the class
listed first. No rule carries a class-prior term.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .datasets import LabeledDataset
from .errors import (
    ClassTooSmall,
    DimensionMismatch,
    EmptyDataset,
    EstimationFailed,
    FemdaError,
    MissingThreshold,
)
from .estimators import (
    FEMDA_MAX_ITER,
    FEMDA_TOL,
    STUDENT_MAX_ITER,
    STUDENT_TOL,
    ClusterParams,
    StudentParams,
    estimate_gaussian,
    femda_fixed_point,
    robust_plugin,
    student_em,
)
from .linalg import SPDMatrix

QDA, TQDA, GQDA, RGQDA, FEMDA = "QDA", "TQDA", "GQDA", "RGQDA", "FEMDA"
METHODS = (QDA, TQDA, GQDA, RGQDA, FEMDA)

MODEL_FORMAT = "femda-model"
MODEL_VERSION = 1

THRESHOLD_GRID = np.round(np.arange(0, 61) * 0.05, 2)
_TINY = np.finfo(float).tiny


@dataclass
class TrainSettings:
    femda_tol: float = FEMDA_TOL
    femda_max_iter: int = FEMDA_MAX_ITER
    student_tol: float = STUDENT_TOL
    student_max_iter: int = STUDENT_MAX_ITER
    robust_nu: float = 3.0
    threshold_grid: np.ndarray = field(default_factory=lambda: THRESHOLD_GRID.copy())


@dataclass
class TrainedModel:
    """A fitted rule: method tag, class labels and per-class parameters."""

    method: str
    classes: list
    params: list
    gqda_threshold: float | None = None
    cached_logdets: np.ndarray = None
    diagnostics: list = field(default_factory=list)
    fit_time: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if len(self.classes) != len(self.params):
            raise ValueError("one parameter set per class is required")
        self.classes = [int(c) for c in self.classes]
        if self.cached_logdets is None:
            self.cached_logdets = np.array([p.dispersion.log_det() for p in self.params])
        if self.method in (GQDA, RGQDA) and self.gqda_threshold is None:
            raise MissingThreshold(f"{self.method} needs a threshold")

    @property
    def dim(self):
        return self.params[0].mean.shape[0]

    def distances(self, x):
        """Squared Mahalanobis distance of each row of ``x`` to each class."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} features, got {x.shape[1]}")
        return np.column_stack([p.mahalanobis_sq(x) for p in self.params])

    def scores(self, x):
        return SCORERS[self.method](x, self)

    def predict(self, x):
        return classify(self, x)

    @property
    def converged(self):
        return all(d is None or d.converged for d in self.diagnostics)

    def to_dict(self):
        out = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "method": self.method,
            "classes": list(self.classes),
            "params": [],
            "gqda_threshold": self.gqda_threshold,
        }
        for p in self.params:
            entry = {"mean": p.mean.tolist(), "dispersion": p.dispersion.entries.tolist()}
            if isinstance(p, StudentParams):
                entry["nu"] = p.nu
            out["params"].append(entry)
        return out

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError("not a serialized model")
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')}")
        params = []
        for entry in doc["params"]:
            disp = SPDMatrix(np.array(entry["dispersion"], dtype=float))
            if "nu" in entry:
                params.append(StudentParams(entry["mean"], disp, float(entry["nu"])))
            else:
                params.append(ClusterParams(entry["mean"], disp))
        return cls(doc["method"], doc["classes"], params, doc.get("gqda_threshold"))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def femda_score(x, model):
    """``log_det(S_k)/m + log(t_k)``; the argmin is the FEMDA decision.

    Rescaling any class dispersion by ``c`` adds ``log c`` to both terms
    with opposite signs, so decisions do not depend on dispersion scale.
    """
    t = model.distances(x)
    return model.cached_logdets / model.dim + np.log(np.maximum(t, _TINY))


def qda_score(x, model):
    return model.cached_logdets + model.distances(x)


def tqda_score(x, model):
    """Negative log multivariate-t density per class."""
    t = model.distances(x)
    m = model.dim
    nu = np.array([p.nu for p in model.params])
    const = -gammaln((nu + m) / 2) + gammaln(nu / 2) + 0.5 * m * np.log(nu * np.pi)
    return const + 0.5 * model.cached_logdets + 0.5 * (nu + m) * np.log1p(t / nu)


def gqda_score(x, model):
    if model.gqda_threshold is None:
        raise MissingThreshold("model has no GQDA threshold")
    return model.distances(x) + model.gqda_threshold * model.cached_logdets


SCORERS = {QDA: qda_score, TQDA: tqda_score, GQDA: gqda_score, RGQDA: gqda_score, FEMDA: femda_score}


def classify(model, x):
    """Predicted labels for the rows of ``x`` (a single label for a vector)."""
    scores = model.scores(x)
    labels = np.asarray(model.classes)[np.argmin(scores, axis=1)]
    return int(labels[0]) if np.ndim(x) == 1 else labels


def accuracy(model, data):
    if len(data) == 0:
        raise EmptyDataset("cannot score an empty dataset")
    return float(np.mean(classify(model, data.points) == data.labels))


def select_gqda_threshold(data, params, grid=THRESHOLD_GRID):
    """Grid value of ``c`` maximising training accuracy of ``t + c log|S|``.

    Ties resolve to the smallest ``c``.
    """
    classes = np.unique(data.labels)
    t = np.column_stack([p.mahalanobis_sq(data.points) for p in params])
    logdets = np.array([p.dispersion.log_det() for p in params])
    best_c, best_acc = float(grid[0]), -1.0
    for c in grid:
        pred = classes[np.argmin(t + c * logdets, axis=1)]
        acc = np.mean(pred == data.labels)
        if acc > best_acc:
            best_c, best_acc = float(c), acc
    return best_c


def train(method, data, settings=None):
    """Fit one rule on a labelled training set.

    Raises
    ------
    ClassTooSmall
        A class has fewer than ``m + 2`` points.
    EstimationFailed
        An estimator broke down on one class.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    settings = settings or TrainSettings()
    if not isinstance(data, LabeledDataset):
        raise TypeError("data must be a LabeledDataset")
    m = data.dim
    start = time.perf_counter()
    classes = [int(c) for c in data.classes]
    params, diagnostics = [], []
    for c in classes:
        x = data.points[data.labels == c]
        if x.shape[0] < m + 2:
            raise ClassTooSmall(data.class_names.get(c, c), x.shape[0], m + 2)
        try:
            p, d = _fit_class(method, x, settings)
        except FemdaError as exc:
            raise EstimationFailed(data.class_names.get(c, c), exc) from exc
        params.append(p)
        diagnostics.append(d)
    threshold = None
    if method in (GQDA, RGQDA):
        threshold = select_gqda_threshold(data, params, settings.threshold_grid)
    model = TrainedModel(method, classes, params, threshold, diagnostics=diagnostics)
    model.fit_time = time.perf_counter() - start
    return model


def _fit_class(method, x, settings):
    if method in (QDA, GQDA):
        return estimate_gaussian(x), None
    if method == TQDA:
        return student_em(x, settings.student_tol, settings.student_max_iter)
    if method == RGQDA:
        return robust_plugin(x, settings.student_tol, settings.student_max_iter, nu=settings.robust_nu)
    return femda_fixed_point(x, tol=settings.femda_tol, max_iter=settings.femda_max_iter)
