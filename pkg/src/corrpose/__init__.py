"""Correspondence-field driven 6-DoF pose refinement with weighted LM on SE(3)."""

__version__ = "0.1.0"

from .camera import CameraIntrinsics, project, project_jacobian, unproject
from .correspondence import (
    CorruptionSpec,
    DescriptorBank,
    DescriptorSpec,
    DriftProvider,
    OracleProvider,
    oracle_provider,
    rectify,
    similarity_weights,
    synth_descriptors,
)
from .fields import CorrespondenceField
from .lm import LMSettings, PoseProblem, SolveReport, jacobian, lm_solve, objective, residuals
from .metrics import EvalReport, add_metric, adds_metric, auc_add, threshold_accuracy
from .refine import RefinementConfig, RefinementResult, model_alignment_error, refine
from .scene import (
    ObjectModel,
    RenderedView,
    Scene,
    SceneSpec,
    generate_scene,
    ground_truth_field,
    load_model,
    render_view,
)
from .se3 import PoseSE3, compose, exp, left_update, log

__all__ = [
    "CameraIntrinsics", "project", "project_jacobian", "unproject",
    "CorruptionSpec", "DescriptorBank", "DescriptorSpec", "DriftProvider", "OracleProvider",
    "oracle_provider", "rectify", "similarity_weights", "synth_descriptors",
    "CorrespondenceField",
    "LMSettings", "PoseProblem", "SolveReport", "jacobian", "lm_solve", "objective", "residuals",
    "EvalReport", "add_metric", "adds_metric", "auc_add", "threshold_accuracy",
    "RefinementConfig", "RefinementResult", "model_alignment_error", "refine",
    "ObjectModel", "RenderedView", "Scene", "SceneSpec", "generate_scene",
    "ground_truth_field", "load_model", "render_view",
    "PoseSE3", "compose", "exp", "left_update", "log",
]
