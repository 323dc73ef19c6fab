"""Correspondence fields: per reference point, a 2D target location in the observed view."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, project, unproject
from .errors import InvalidArgumentError
from .se3 import PoseSE3


@dataclass(frozen=True, eq=False)
class CorrespondenceField:
    """Targets ``(n, 2)`` in pixels plus a validity mask ``(n,)``.

    Entries are aligned index-by-index with the RenderedView they came from.
    Invalid entries may hold any value and are ignored downstream.
    """

    targets: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        t = np.array(self.targets, dtype=float).reshape(-1, 2)
        v = np.array(self.valid, dtype=bool).reshape(-1)
        if t.shape[0] != v.shape[0]:
            raise InvalidArgumentError("targets and validity mask differ in length")
        if not np.all(np.isfinite(t[v])):
            raise InvalidArgumentError("valid field entries must be finite")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "targets", t)
        object.__setattr__(self, "valid", v)

    def __len__(self):
        return self.targets.shape[0]

    def errors_to(self, other: CorrespondenceField) -> np.ndarray:
        """Per-entry endpoint distance to ``other`` over entries valid in both."""
        both = self.valid & other.valid
        return np.linalg.norm(self.targets[both] - other.targets[both], axis=1)


def pose_induced_field(pixels, depths, delta: PoseSE3, K: CameraIntrinsics) -> CorrespondenceField:
    """Field ``project(delta * unproject(x, z))`` for every reference point.

    Entries whose target leaves the image are marked invalid. Raises
    BehindCameraError if a transformed point crosses the camera plane.
    """
    pts = delta.apply(unproject(pixels, depths, K))
    targets = project(pts, K)
    return CorrespondenceField(targets, K.in_bounds(targets))
