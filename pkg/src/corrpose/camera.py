"""Ideal pinhole camera: projection, back-projection and the projection Jacobian.

Pixel coordinates are continuous, with integer pixel centres at integer
coordinates. No lens distortion is modelled.

All functions accept a single point or a stacked array (last axis = coords).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import BehindCameraError, InvalidArgumentError

Z_MIN = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidArgumentError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise InvalidArgumentError("image size must be positive")

    @classmethod
    def linemod(cls) -> CameraIntrinsics:
        """Intrinsics of the commonly used LINEMOD Kinect camera, 640x480."""
        return cls(572.4114, 573.57043, 325.2611, 242.04899, 640, 480)

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def in_bounds(self, pixels) -> np.ndarray:
        """Mask of pixels that fall on the sensor.

        The sensor spans ``[-0.5, width - 0.5) x [-0.5, height - 0.5)``, since
        pixel centres sit at integer coordinates.
        """
        p = np.asarray(pixels, dtype=float)
        u, v = p[..., 0], p[..., 1]
        return (u >= -0.5) & (u < self.width - 0.5) & (v >= -0.5) & (v < self.height - 0.5)

    def to_dict(self) -> dict:
        return asdict(self)


def _depth_guard(z, z_min, error_cls, what):
    if np.any(~(np.asarray(z) > z_min)):
        raise error_cls(f"{what} must exceed z_min={z_min:g} m")


def project(points, K: CameraIntrinsics, z_min: float = Z_MIN) -> np.ndarray:
    """Project camera-frame point(s) to pixel coordinates."""
    p = np.asarray(points, dtype=float)
    z = p[..., 2]
    _depth_guard(z, z_min, BehindCameraError, "point depth")
    u = K.fx * p[..., 0] / z + K.cx
    v = K.fy * p[..., 1] / z + K.cy
    return np.stack([u, v], axis=-1)


def unproject(pixels, depth, K: CameraIntrinsics, z_min: float = Z_MIN) -> np.ndarray:
    """Back-project pixel(s) at the given depth(s) to camera-frame points."""
    x = np.asarray(pixels, dtype=float)
    z = np.asarray(depth, dtype=float)
    _depth_guard(z, z_min, InvalidArgumentError, "depth")
    z = np.broadcast_to(z, x.shape[:-1])
    return np.stack([(x[..., 0] - K.cx) * z / K.fx, (x[..., 1] - K.cy) * z / K.fy, z], axis=-1)


def project_jacobian(points, K: CameraIntrinsics, z_min: float = Z_MIN) -> np.ndarray:
    """d(project)/dX, shape (..., 2, 3), in pixels per meter."""
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    _depth_guard(z, z_min, BehindCameraError, "point depth")
    iz = 1.0 / z
    out = np.zeros(p.shape[:-1] + (2, 3))
    out[..., 0, 0] = K.fx * iz
    out[..., 0, 2] = -K.fx * x * iz * iz
    out[..., 1, 1] = K.fy * iz
    out[..., 1, 2] = -K.fy * y * iz * iz
    return out
