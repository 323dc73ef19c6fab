"""Rigid transforms on SE(3) and their twist coordinates.

Twists are plain length-6 float arrays ordered ``(rho, phi)``: translational
part first, then the axis-angle rotation. Increments always act on the left,
in the camera frame::

    left_update(d, xi) == log(exp(d) @ exp(xi))

Right-multiplied updates are intentionally not provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRotationError, InvalidArgumentError

# Below this angle the trig ratios switch to their Taylor series. The series
# are accurate to O(theta^6) there, so both branches agree to machine precision
# and the maps stay smooth across the switch.
SERIES_ANGLE = 1e-3
# log() refuses rotations this close to pi.
PI_MARGIN = 1e-6
ORTHO_TOL = 1e-12


def skew(v):
    """Hat operator: 3-vector -> skew-symmetric matrix."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _coefficients(theta):
    """Return sin(t)/t, (1-cos t)/t^2, (t-sin t)/t^3."""
    if theta < SERIES_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
        return a, b, c
    s, co = math.sin(theta), math.cos(theta)
    return s / theta, (1.0 - co) / theta**2, (theta - s) / theta**3


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{what} has non-finite components")


def as_twist(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape != (6,):
        raise InvalidArgumentError(f"twist must have 6 components, got {xi.shape[0]}")
    _check_finite(xi, "twist")
    return xi


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense."""
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform ``X -> rotation @ X + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        _check_finite(r, "rotation")
        _check_finite(t, "translation")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> PoseSE3:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> PoseSE3:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points) -> np.ndarray:
        """Transform a single 3-vector or an (N, 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> PoseSE3:
        rt = self.rotation.T
        return PoseSE3(rt, -rt @ self.translation)

    def __matmul__(self, other: PoseSE3) -> PoseSE3:
        return compose(self, other)

    def allclose(self, other: PoseSE3, atol: float = 1e-10) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )

    def __repr__(self):
        return f"PoseSE3(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def exp(xi) -> PoseSE3:
    """Exponential map se(3) -> SE(3) (Rodrigues rotation plus V-matrix)."""
    xi = as_twist(xi)
    rho, phi = xi[:3], xi[3:]
    theta = float(np.linalg.norm(phi))
    a, b, c = _coefficients(theta)
    w = skew(phi)
    w2 = w @ w
    rot = np.eye(3) + a * w + b * w2
    v = np.eye(3) + b * w + c * w2
    return PoseSE3(rot, v @ rho)


def rotation_angle(rot: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, in radians, robust near 0 and pi."""
    s = 0.5 * np.linalg.norm(vee(rot - rot.T))
    c = 0.5 * (np.trace(rot) - 1.0)
    return math.atan2(s, c)


def log(pose: PoseSE3) -> np.ndarray:
    """Logarithm SE(3) -> se(3) on the principal branch.

    Raises DegenerateRotationError when the rotation angle is within 1e-6 of pi,
    where the rotation axis is ambiguous.
    """
    rot = pose.rotation
    theta = rotation_angle(rot)
    if theta > math.pi - PI_MARGIN:
        raise DegenerateRotationError(f"rotation angle {theta:.9f} rad is too close to pi")
    half_axis = 0.5 * vee(rot - rot.T)  # sin(theta) * axis
    if theta < SERIES_ANGLE:
        t2 = theta * theta
        scale = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
        d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        scale = theta / math.sin(theta)
        a, b, _ = _coefficients(theta)
        d = (1.0 - a / (2.0 * b)) / (theta * theta)
    phi = scale * half_axis
    w = skew(phi)
    v_inv = np.eye(3) - 0.5 * w + d * (w @ w)
    return np.concatenate([v_inv @ pose.translation, phi])


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """``a @ b``: apply ``b`` first, then ``a``."""
    rot = a.rotation @ b.rotation
    if np.abs(rot.T @ rot - np.eye(3)).max() > ORTHO_TOL:
        rot = orthonormalize(rot)
    return PoseSE3(rot, a.rotation @ b.translation + a.translation)


def left_update(xi_inc, xi) -> np.ndarray:
    """Left-multiplied twist increment: ``log(exp(xi_inc) @ exp(xi))``."""
    return log(compose(exp(xi_inc), exp(xi)))


def twist_matrix(xi) -> np.ndarray:
    """4x4 matrix form of a twist, suitable for a generic matrix exponential."""
    xi = as_twist(xi)
    m = np.zeros((4, 4))
    m[:3, :3] = skew(xi[3:])
    m[:3, 3] = xi[:3]
    return m


def euler_xyz(angles) -> np.ndarray:
    """Rotation for intrinsic X-Y-Z Euler angles (radians): Rx @ Ry @ Rz."""
    ax, ay, az = angles
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rx @ ry @ rz


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation (Haar measure) from a unit quaternion."""
    q = rng.normal(size=4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotation_error(a: PoseSE3, b: PoseSE3) -> float:
    """Geodesic angle (radians) between the rotations of two poses."""
    return rotation_angle(a.rotation @ b.rotation.T)


def translation_error(a: PoseSE3, b: PoseSE3) -> float:
    return float(np.linalg.norm(a.translation - b.translation))
