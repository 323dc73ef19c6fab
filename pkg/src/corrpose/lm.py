"""Weighted reprojection least squares over a left-multiplied SE(3) increment.

For reference points ``X_i = unproject(x_i, z_i)`` and estimated targets
``c_i`` the residual is ``r_i(xi) = c_i - project(exp(xi) X_i)`` and the
objective is ``E(xi) = sum_i w_i |r_i|^2``. ``J = -dr/d(delta)`` with respect
to an increment applied as ``exp(delta) @ exp(xi)``, so the damped step

    delta = (J^T W J + lambda I)^-1 J^T W r

is a descent direction and ``-2 J^T W r`` is the gradient of E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .camera import CameraIntrinsics, project, project_jacobian, unproject
from .errors import (
    BehindCameraError,
    DegenerateRotationError,
    InvalidArgumentError,
    UnderdeterminedProblemError,
)
from .fields import CorrespondenceField
from .se3 import PoseSE3, as_twist, exp, left_update

MIN_CORRESPONDENCES = 3
LAMBDA_MAX = 1e12


@dataclass(frozen=True)
class LMSettings:
    lambda0: float = 1e-4
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    max_iterations: int = 20
    # relative: stop once an accepted step lowers E by less than ftol * E
    ftol: float = 1e-12
    step_tol: float = 1e-12
    marquardt_scaling: bool = False

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise InvalidArgumentError("lambda0 must be > 0")
        if not self.lambda_up > 1:
            raise InvalidArgumentError("lambda_up must be > 1")
        if not 0 < self.lambda_down < 1:
            raise InvalidArgumentError("lambda_down must lie in (0, 1)")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class PoseProblem:
    """Reference points with depths, their estimated targets and per-point weights.

    Entries that are invalid in the field get weight zero regardless of the
    weight passed in.
    """

    pixels: np.ndarray
    depths: np.ndarray
    field: CorrespondenceField
    weights: np.ndarray
    K: CameraIntrinsics
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.field)
        pix = np.asarray(self.pixels, dtype=float).reshape(-1, 2)
        dep = np.asarray(self.depths, dtype=float).reshape(-1)
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), (n,)).copy()
        if pix.shape[0] != n or dep.shape[0] != n:
            raise InvalidArgumentError("view and field differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidArgumentError("weights must be finite and non-negative")
        w[~self.field.valid] = 0.0
        object.__setattr__(self, "pixels", pix)
        object.__setattr__(self, "depths", dep)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "points", unproject(pix, dep, self.K))

    @classmethod
    def from_view(cls, view, field: CorrespondenceField, weights, K) -> PoseProblem:
        return cls(view.pixels, view.depths, field, weights, K)

    @property
    def active(self) -> np.ndarray:
        return self.weights > 0

    def with_weights(self, weights) -> PoseProblem:
        return PoseProblem(self.pixels, self.depths, self.field, weights, self.K)


@dataclass
class SolveReport:
    xi: np.ndarray
    pose: PoseSE3
    objectives: list
    iterations: int
    accepted: int
    reason: str

    @property
    def final_objective(self) -> float:
        return self.objectives[-1]


def _transformed(problem: PoseProblem, xi) -> np.ndarray:
    return exp(xi).apply(problem.points)


def _residual_matrix(problem: PoseProblem, pts: np.ndarray) -> np.ndarray:
    r = problem.field.targets - project(pts, problem.K)
    r[~problem.active] = 0.0
    return r


def residuals(problem: PoseProblem, xi) -> np.ndarray:
    """Stacked residual vector ``(r_1u, r_1v, r_2u, ...)``; zero on inactive entries."""
    return _residual_matrix(problem, _transformed(problem, as_twist(xi))).reshape(-1)


def _jacobian_from_points(problem: PoseProblem, pts: np.ndarray) -> np.ndarray:
    jp = project_jacobian(pts, problem.K)  # (n, 2, 3)
    n = pts.shape[0]
    # d(exp(d) X)/dd at d = 0 is [I | -[X]x]; jp @ -[X]x == cross(X, jp rows)
    rot = np.cross(pts[:, None, :], jp)
    j = np.concatenate([jp, rot], axis=2)
    j[~problem.active] = 0.0
    return j.reshape(2 * n, 6)


def jacobian(problem: PoseProblem, xi) -> np.ndarray:
    """``-dr/d(delta)`` for a left increment, shape ``(2n, 6)``, columns ``(rho, phi)``."""
    return _jacobian_from_points(problem, _transformed(problem, as_twist(xi)))


def objective(problem: PoseProblem, xi) -> float:
    r = _residual_matrix(problem, _transformed(problem, as_twist(xi)))
    return float(np.dot(problem.weights, np.einsum("ij,ij->i", r, r)))


def _safe_objective(problem, xi) -> float:
    try:
        return objective(problem, xi)
    except BehindCameraError:
        return math.inf


def lm_solve(problem: PoseProblem, settings: LMSettings = LMSettings(), xi0=None) -> SolveReport:
    """Levenberg-Marquardt on the weighted objective, starting at ``xi0`` (default zero).

    A step is kept only when it strictly lowers E; then lambda shrinks by
    ``lambda_down``, otherwise it grows by ``lambda_up``. Steps that push a
    point behind the camera or reach a degenerate rotation count as E = inf.
    """
    if int(problem.active.sum()) < MIN_CORRESPONDENCES:
        raise UnderdeterminedProblemError(
            f"need {MIN_CORRESPONDENCES} valid weighted correspondences, got {int(problem.active.sum())}"
        )
    xi = np.zeros(6) if xi0 is None else as_twist(xi0).copy()
    w2 = np.repeat(problem.weights, 2)
    lam = settings.lambda0
    pts = _transformed(problem, xi)
    r = _residual_matrix(problem, pts).reshape(-1)
    e = float(np.dot(w2, r * r))
    objectives = [e]
    accepted = 0
    reason = "max_iterations"
    relinearize = True
    it = 0
    while it < settings.max_iterations:
        if relinearize:
            j = _jacobian_from_points(problem, pts)
            jtw = j.T * w2
            hess = jtw @ j
            grad = jtw @ r
            relinearize = False
        it += 1
        damp = lam * (np.diag(np.diag(hess)) if settings.marquardt_scaling else np.eye(6))
        try:
            step = cho_solve(cho_factor(hess + damp), grad)
        except LinAlgError:
            step = None
        if step is not None and np.linalg.norm(step) < settings.step_tol:
            reason = "step_tol"
            break
        e_new = math.inf
        if step is not None and np.all(np.isfinite(step)):
            try:
                xi_new = left_update(step, xi)
                e_new = _safe_objective(problem, xi_new)
            except DegenerateRotationError:
                pass
        if e_new < e:
            decrease = e - e_new
            xi, e = xi_new, e_new
            objectives.append(e)
            accepted += 1
            lam *= settings.lambda_down
            if e == 0.0:
                reason = "exact"
                break
            if decrease <= settings.ftol * (e + decrease):
                reason = "ftol"
                break
            pts = _transformed(problem, xi)
            r = _residual_matrix(problem, pts).reshape(-1)
            relinearize = True
        else:
            lam *= settings.lambda_up
            if lam > LAMBDA_MAX:
                reason = "stalled"
                break
    return SolveReport(xi, exp(xi), objectives, it, accepted, reason)
