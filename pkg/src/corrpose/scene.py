"""Object models, synthetic scenes and point-projection "rendering".

A rendered view here is the set of model vertices projected into the image
with their depths; there is no rasterisation, shading or self-occlusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .camera import Z_MIN, CameraIntrinsics, project, unproject
from .errors import (
    BehindCameraError,
    EmptyViewError,
    InvalidArgumentError,
    ModelParseError,
    PoseError,
    SceneGenerationError,
)
from .fields import CorrespondenceField, pose_induced_field
from .se3 import PoseSE3, euler_xyz, random_rotation

BUILTIN_DIAMETER = 0.2


@dataclass(frozen=True, eq=False)
class ObjectModel:
    vertices: np.ndarray
    symmetric: bool = False
    name: str = "model"
    diameter: float = field(init=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidArgumentError("vertices must be an (M, 3) array")
        if v.shape[0] < 4:
            raise InvalidArgumentError(f"need at least 4 vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("vertices must be finite")
        if np.linalg.matrix_rank(v - v.mean(axis=0), tol=1e-12) < 3:
            raise InvalidArgumentError("vertices are coplanar")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "diameter", float(pdist(v).max()))

    def __len__(self):
        return self.vertices.shape[0]


@dataclass(frozen=True, eq=False)
class RenderedView:
    """Visible vertices of a model seen at ``pose``.

    ``indices[i]`` is the model vertex behind entry i, ``pixels[i]`` its image
    location and ``depths[i]`` its camera-frame depth.
    """

    indices: np.ndarray
    pixels: np.ndarray
    depths: np.ndarray
    pose: PoseSE3

    def __len__(self):
        return self.indices.shape[0]


@dataclass(frozen=True)
class SceneSpec:
    """Placement range for the ground truth and the initial-pose noise model.

    Rotation noise is a per-axis Gaussian on intrinsic XYZ Euler angles; the
    translation noise is a per-axis Gaussian in the camera frame.
    """

    rot_noise_deg: float = 10.0
    trans_noise: tuple = (0.03, 0.03, 0.15)
    depth_range: tuple = (0.7, 1.1)
    center_margin: float = 0.3
    max_attempts: int = 100

    def __post_init__(self):
        if self.rot_noise_deg < 0 or any(s < 0 for s in self.trans_noise):
            raise InvalidArgumentError("noise standard deviations must be non-negative")
        if len(self.trans_noise) != 3:
            raise InvalidArgumentError("trans_noise needs three components")
        lo, hi = self.depth_range
        if not (Z_MIN < lo <= hi):
            raise InvalidArgumentError("depth_range must satisfy z_min < near <= far")
        if not (0.0 <= self.center_margin < 0.5):
            raise InvalidArgumentError("center_margin must lie in [0, 0.5)")


@dataclass(frozen=True, eq=False)
class Scene:
    model: ObjectModel
    intrinsics: CameraIntrinsics
    pose_gt: PoseSE3
    pose_init: PoseSE3
    seed: int


def render_view(model: ObjectModel, pose: PoseSE3, K: CameraIntrinsics) -> RenderedView:
    """Project every model vertex under ``pose``; keep those landing in the image."""
    pts = pose.apply(model.vertices)
    if np.any(pts[:, 2] <= Z_MIN):
        raise BehindCameraError("model crosses the camera plane")
    pix = project(pts, K)
    keep = np.flatnonzero(K.in_bounds(pix))
    if keep.size == 0:
        raise EmptyViewError("no vertex projects inside the image")
    return RenderedView(keep, pix[keep], pts[keep, 2], pose)


def ground_truth_field(view: RenderedView, delta_gt: PoseSE3, K: CameraIntrinsics) -> CorrespondenceField:
    """Correspondence field induced by the true residual pose."""
    return pose_induced_field(view.pixels, view.depths, delta_gt, K)


def sample_pose_noise(rng: np.random.Generator, spec: SceneSpec):
    """Draw (rotation perturbation, camera-frame translation offset)."""
    angles = rng.normal(0.0, math.radians(spec.rot_noise_deg), size=3)
    offset = rng.normal(0.0, 1.0, size=3) * np.asarray(spec.trans_noise, dtype=float)
    return euler_xyz(angles), offset


def perturb_pose(pose: PoseSE3, rot_noise: np.ndarray, offset: np.ndarray) -> PoseSE3:
    """Rotate the object about its own origin and shift it in the camera frame."""
    return PoseSE3(rot_noise @ pose.rotation, pose.translation + offset)


def generate_scene(model: ObjectModel, K: CameraIntrinsics, spec: SceneSpec, seed: int) -> Scene:
    """Random ground-truth pose with the whole model in view, plus a noisy initial pose.

    Draws are repeated (up to ``spec.max_attempts``) when the ground truth
    leaves the frustum or the initial pose cannot be rendered.
    """
    rng = np.random.default_rng(seed)
    lo, hi = spec.depth_range
    m = spec.center_margin
    for _ in range(spec.max_attempts):
        rot = random_rotation(rng)
        z = rng.uniform(lo, hi)
        u = rng.uniform(m * K.width, (1 - m) * K.width)
        v = rng.uniform(m * K.height, (1 - m) * K.height)
        pose_gt = PoseSE3(rot, unproject([u, v], z, K))
        rot_noise, offset = sample_pose_noise(rng, spec)
        pts = pose_gt.apply(model.vertices)
        if np.any(pts[:, 2] <= Z_MIN) or not np.all(K.in_bounds(project(pts, K))):
            continue
        pose_init = perturb_pose(pose_gt, rot_noise, offset)
        try:
            render_view(model, pose_init, K)
        except PoseError:
            continue
        return Scene(model, K, pose_gt, pose_init, seed)
    raise SceneGenerationError(f"no valid scene after {spec.max_attempts} attempts (seed {seed})")


# ---------------------------------------------------------------------------
# model files and built-in shapes


def load_model(path, symmetric: bool = False) -> ObjectModel:
    """Read a plain-text model: one ``x y z`` triple per line, meters, '#' comments."""
    path = Path(path)
    rows = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ModelParseError(f"expected 3 values, found {len(parts)}", lineno)
            try:
                xyz = [float(p) for p in parts]
            except ValueError:
                raise ModelParseError(f"non-numeric token in {line!r}", lineno) from None
            if not all(math.isfinite(c) for c in xyz):
                raise ModelParseError("non-finite coordinate", lineno)
            rows.append(xyz)
    if not rows:
        raise ModelParseError(f"{path}: no vertices found")
    if len(rows) < 4:
        raise ModelParseError(f"{path}: need at least 4 vertices, got {len(rows)}")
    return ObjectModel(np.array(rows), symmetric=symmetric, name=path.stem)


def save_model(model: ObjectModel, path) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"# {model.name}: {len(model)} vertices, diameter {model.diameter:.9g} m\n")
        for x, y, z in model.vertices:
            fh.write(f"{x:.12g} {y:.12g} {z:.12g}\n")


def tetrahedron(diameter: float = BUILTIN_DIAMETER) -> ObjectModel:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    v *= diameter / (2 * math.sqrt(2))
    return ObjectModel(v, name="tetra")


def box_grid(n: int, diameter: float = BUILTIN_DIAMETER) -> ObjectModel:
    """``n**3`` points on a regular grid filling a 3:2:1.6 box."""
    if n < 2:
        raise InvalidArgumentError("box grid needs n >= 2")
    dims = np.array([3.0, 2.0, 1.6])
    dims *= diameter / np.linalg.norm(dims)
    axes = [np.linspace(-d / 2, d / 2, n) for d in dims]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return ObjectModel(g, name=f"box-grid-{n}")


def sphere(n: int, diameter: float = BUILTIN_DIAMETER) -> ObjectModel:
    """``n`` points on a Fibonacci spiral over a sphere."""
    if n < 4:
        raise InvalidArgumentError("sphere needs n >= 4")
    k = np.arange(n) + 0.5
    polar = np.arccos(1 - 2 * k / n)
    azim = math.pi * (1 + math.sqrt(5)) * k
    v = np.stack([np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar), np.cos(polar)], axis=1)
    return ObjectModel(v * diameter / 2, name=f"sphere-{n}")


def builtin_model(name: str, n: int | None = None) -> ObjectModel:
    """Look up a built-in shape: ``tetra``, ``box-grid`` (n per axis) or ``sphere`` (n points)."""
    if name == "tetra":
        return tetrahedron()
    if name == "box-grid":
        return box_grid(8 if n is None else n)
    if name == "sphere":
        return sphere(500 if n is None else n)
    raise InvalidArgumentError(f"unknown built-in model {name!r}")
