"""Exception types raised across the package."""


class PoseError(Exception):
    """Base class for all errors raised by corrpose."""


class InvalidArgumentError(PoseError, ValueError):
    pass


class DegenerateRotationError(PoseError):
    """Rotation angle too close to pi for a unique logarithm."""


class BehindCameraError(PoseError):
    """A point lies on or behind the camera plane (z <= z_min)."""


class EmptyViewError(PoseError):
    """No model vertex projects inside the image."""


class UnderdeterminedProblemError(PoseError):
    """Fewer valid weighted correspondences than needed for 6 DoF."""


class SceneGenerationError(PoseError):
    pass


class ModelParseError(PoseError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInputError(PoseError, ValueError):
    pass


class ConfigError(PoseError, ValueError):
    pass
