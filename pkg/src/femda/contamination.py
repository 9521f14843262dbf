"""Scale-noise injection: selected points are pushed away from (or towards)
their class centre by a factor ``lam``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, MissingCenter

GROUND_TRUTH = "ground_truth"
EMPIRICAL = "empirical_class_mean"


@dataclass(frozen=True)
class ContaminationSpec:
    fraction: float
    lam: float
    center_source: str = GROUND_TRUTH
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ConfigInvalid("contamination fraction must lie in [0, 1]")
        if not self.lam > 0:
            raise ConfigInvalid("contamination lambda must be positive")
        if self.center_source not in (GROUND_TRUTH, EMPIRICAL):
            raise ConfigInvalid(f"unknown center source {self.center_source!r}")

    @classmethod
    def parse(cls, text, **kwargs):
        """Parse the CLI form ``<fraction>:<lambda>``, e.g. ``0.25:8``."""
        try:
            frac, lam = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigInvalid(f"expected <fraction>:<lambda>, got {text!r}") from None
        return cls(frac, lam, **kwargs)


def class_means(data):
    return {int(c): data.points[data.labels == c].mean(axis=0) for c in data.classes}


def contaminate(data, centers, spec, rng):
    """Rescale a random ``round(fraction * n_k)`` points of every class.

    Each selected point becomes ``mu_k + lam * (x - mu_k)``; everything else
    is left untouched.

    Returns
    -------
    dataset : LabeledDataset
    altered : numpy.ndarray
        Sorted indices of the rescaled rows.
    """
    x = data.points.copy()
    altered = []
    for c in data.classes:
        c = int(c)
        if c not in centers:
            raise MissingCenter(c)
        idx = np.flatnonzero(data.labels == c)
        k = int(math.floor(spec.fraction * idx.size + 0.5))
        if k == 0:
            continue
        chosen = np.sort(rng.choice(idx, size=k, replace=False))
        mu = np.asarray(centers[c], dtype=float)
        if spec.lam != 1:
            x[chosen] = mu + spec.lam * (x[chosen] - mu)
        altered.append(chosen)
    altered = np.sort(np.concatenate(altered)) if altered else np.array([], dtype=int)
    return data.with_points(x), altered
