"""ADD / ADD-S pose errors, thresholded accuracy and the AUC of ADD(-S)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyInputError, InvalidArgumentError
from .scene import ObjectModel
from .se3 import PoseSE3

DIAMETER_FRACTIONS = (0.02, 0.05, 0.1)
# 0.1 cm steps up to 10 cm; the tau = 0 endpoint is left out because a strict
# "less than" test can never pass it.
AUC_THRESHOLDS = np.arange(1, 101) / 1000.0


def add_metric(pose_hat: PoseSE3, pose_gt: PoseSE3, model: ObjectModel) -> float:
    """Mean distance between corresponding transformed model points (meters)."""
    a = pose_hat.apply(model.vertices)
    b = pose_gt.apply(model.vertices)
    return float(np.linalg.norm(a - b, axis=1).mean())


def adds_metric(pose_hat: PoseSE3, pose_gt: PoseSE3, model: ObjectModel) -> float:
    """Mean closest-point distance, for symmetric objects (meters)."""
    a = pose_hat.apply(model.vertices)
    b = pose_gt.apply(model.vertices)
    return float(cdist(a, b).min(axis=1).mean())


def add_s(pose_hat: PoseSE3, pose_gt: PoseSE3, model: ObjectModel) -> float:
    """ADD-S for models flagged symmetric, ADD otherwise."""
    if model.symmetric:
        return adds_metric(pose_hat, pose_gt, model)
    return add_metric(pose_hat, pose_gt, model)


def _values(values) -> np.ndarray:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise EmptyInputError("no values to evaluate")
    return v


def threshold_accuracy(values, diameter: float, fraction: float) -> float:
    """Percentage of values strictly below ``fraction * diameter``."""
    if not (diameter > 0 and fraction > 0):
        raise InvalidArgumentError("diameter and fraction must be positive")
    v = _values(values)
    return 100.0 * np.count_nonzero(v < fraction * diameter) / v.size


def auc_add(values) -> float:
    """Mean accuracy (percent) over thresholds 1 mm, 2 mm, ..., 100 mm.

    ``inf`` (a trial with no usable estimate) misses every threshold.
    """
    v = _values(values)
    if np.any(np.isnan(v)) or np.any(v < 0):
        raise InvalidArgumentError("values must be non-negative and not NaN")
    passed = v[None, :] < AUC_THRESHOLDS[:, None]
    return float(100.0 * passed.mean())


@dataclass
class EvalReport:
    values: np.ndarray
    diameter: float
    accuracy: dict
    auc: float

    @classmethod
    def from_values(cls, values, diameter: float, fractions=DIAMETER_FRACTIONS) -> EvalReport:
        v = _values(values)
        acc = {f: threshold_accuracy(v, diameter, f) for f in fractions}
        return cls(v, diameter, acc, auc_add(v))

    def passes(self, fraction: float) -> np.ndarray:
        return self.values < fraction * self.diameter
