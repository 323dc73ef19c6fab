"""Synthetic correspondence providers, descriptor similarity weights and rectification.

The providers stand in for a learned flow estimator. They know which of their
outputs are gross mismatches, but that knowledge only ever leaves through
``Estimate.outlier_mask``, which is consumed by the descriptor simulator and
never by the pose solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np

from .camera import CameraIntrinsics
from .errors import InvalidArgumentError
from .fields import CorrespondenceField, pose_induced_field
from .se3 import PoseSE3


@dataclass(frozen=True)
class CorruptionSpec:
    """Gaussian pixel noise plus uniform-disk gross outliers."""

    noise_std: float = 0.0
    outlier_fraction: float = 0.0
    outlier_radius: float = 50.0

    def __post_init__(self):
        if not self.noise_std >= 0:
            raise InvalidArgumentError("noise_std must be >= 0")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise InvalidArgumentError("outlier_fraction must lie in [0, 1]")
        if not self.outlier_radius > 0:
            raise InvalidArgumentError("outlier_radius must be > 0")


@dataclass(frozen=True)
class DescriptorSpec:
    dim: int = 16
    inlier_perturb: float = 0.05
    sigma: float = 1.0

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidArgumentError("descriptor dimension must be >= 2")
        if not 0.0 <= self.inlier_perturb < 0.5:
            raise InvalidArgumentError("inlier_perturb must lie in [0, 0.5)")
        if not self.sigma > 0:
            raise InvalidArgumentError("sigma must be > 0")


@dataclass(frozen=True, eq=False)
class DescriptorBank:
    """Paired unit descriptors: model side ``(n, D)`` and image side ``(n, D)``."""

    model: np.ndarray
    target: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        if self.model.shape != self.target.shape:
            raise InvalidArgumentError("descriptor arrays differ in shape")
        if not self.sigma > 0:
            raise InvalidArgumentError("sigma must be > 0")


class Estimate(NamedTuple):
    field: CorrespondenceField
    outlier_mask: np.ndarray


def _uniform_disk(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(size=n))
    a = rng.uniform(0.0, 2 * math.pi, size=n)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)


def corrupt_field(gt_field: CorrespondenceField, corruption: CorruptionSpec, rng) -> Estimate:
    """Noise every valid entry; replace a Bernoulli subset by disk outliers around the truth."""
    n = len(gt_field)
    targets = gt_field.targets.copy()
    noise = rng.normal(0.0, 1.0, size=(n, 2)) * corruption.noise_std
    is_out = rng.uniform(size=n) < corruption.outlier_fraction
    disk = _uniform_disk(rng, n, corruption.outlier_radius)
    targets = np.where(is_out[:, None], targets + disk, targets + noise)
    mask = is_out & gt_field.valid
    targets[~gt_field.valid] = gt_field.targets[~gt_field.valid]
    return Estimate(CorrespondenceField(targets, gt_field.valid), mask)


def oracle_provider(gt_field: CorrespondenceField, corruption: CorruptionSpec, seed) -> CorrespondenceField:
    """Corrupted copy of the ground-truth field, deterministic in ``seed``."""
    return corrupt_field(gt_field, corruption, np.random.default_rng(seed)).field


class Provider(Protocol):
    def estimate(self, gt_field: CorrespondenceField, prior: CorrespondenceField, rng) -> Estimate: ...


@dataclass(frozen=True)
class OracleProvider:
    """Re-corrupts around the ground truth each call; the prior is ignored."""

    corruption: CorruptionSpec = CorruptionSpec()

    def estimate(self, gt_field, prior, rng) -> Estimate:
        return corrupt_field(gt_field, self.corruption, rng)


@dataclass(frozen=True)
class DriftProvider:
    """Emulates a correlation lookup restricted to a window around the prior.

    Where the true target lies within ``window`` pixels of the prior, the
    entry behaves like the oracle provider. Elsewhere the lookup cannot see
    the true match and returns a spurious one, uniform in the window disk
    around the prior; those entries count as outliers.
    """

    corruption: CorruptionSpec = CorruptionSpec()
    window: float = 8.0

    def __post_init__(self):
        if not self.window > 0:
            raise InvalidArgumentError("window must be > 0")

    def estimate(self, gt_field, prior, rng) -> Estimate:
        base = corrupt_field(gt_field, self.corruption, rng)
        spurious = prior.targets + _uniform_disk(rng, len(prior), self.window)
        valid = gt_field.valid & prior.valid
        reach = np.linalg.norm(gt_field.targets - prior.targets, axis=1) <= self.window
        hit = reach & valid
        targets = np.where(hit[:, None], base.field.targets, spurious)
        targets[~valid] = gt_field.targets[~valid]
        mask = (base.outlier_mask & hit) | (valid & ~reach)
        return Estimate(CorrespondenceField(targets, valid), mask)


def identity_field(pixels) -> CorrespondenceField:
    """Zero-motion field: every point maps onto itself."""
    p = np.asarray(pixels, dtype=float)
    return CorrespondenceField(p, np.ones(p.shape[0], dtype=bool))


def _random_unit(rng, n, dim):
    d = rng.normal(size=(n, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def synth_descriptors(field: CorrespondenceField, outlier_mask, spec: DescriptorSpec, seed) -> DescriptorBank:
    """Descriptor pairs that agree for inliers and are unrelated for outliers.

    An inlier pair has inner product drawn uniformly from
    ``[1 - inlier_perturb, 1]``; an outlier's image descriptor is an
    independent random unit vector.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = len(field)
    outlier_mask = np.asarray(outlier_mask, dtype=bool)
    if outlier_mask.shape != (n,):
        raise InvalidArgumentError("outlier mask does not match the field length")
    dm = _random_unit(rng, n, spec.dim)
    cos = 1.0 - rng.uniform(size=n) * spec.inlier_perturb
    ortho = rng.normal(size=(n, spec.dim))
    ortho -= np.sum(ortho * dm, axis=1, keepdims=True) * dm
    ortho /= np.linalg.norm(ortho, axis=1, keepdims=True)
    di = cos[:, None] * dm + np.sqrt(1.0 - cos**2)[:, None] * ortho
    di[outlier_mask] = _random_unit(rng, int(outlier_mask.sum()), spec.dim)
    return DescriptorBank(dm, di, spec.sigma)


def similarity_weights(bank: DescriptorBank) -> np.ndarray:
    """``exp(-|1 - <d_model, d_image>| / sigma)`` per pair, in (0, 1]."""
    dots = np.einsum("ij,ij->i", bank.model, bank.target)
    return np.exp(-np.abs(1.0 - dots) / bank.sigma)


def rectify(field: CorrespondenceField, view, delta_pose: PoseSE3, K: CameraIntrinsics) -> CorrespondenceField:
    """Replace ``field`` wholesale by the rigid field of ``delta_pose`` over ``view``."""
    if len(field) != len(view.pixels):
        raise InvalidArgumentError("field and view differ in length")
    return pose_induced_field(view.pixels, view.depths, delta_pose, K)
