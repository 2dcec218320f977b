"""graspfield: category-level generalization of demonstrated grasps.

Learns a latent deformation-field manifold from training shapes, fits it to
full or partial point-cloud observations, transfers grasp keypoints through
the fitted deformation, regresses a feasible hand pose in task space, and
provides the shaped-reward calculus for downstream policy learning.
"""

from .cpd import CpdConfig, DeformationField, apply_deformation, register_nonrigid
from .errors import (
    DegenerateViewError,
    GraspFieldError,
    InvalidParameterError,
    NumericFailureError,
    ParseError,
)
from .geometry import (
    NormalizationParams,
    Pose,
    chamfer_distance,
    denormalize,
    farthest_point_sample,
    gaussian_kernel_matrix,
    normalize,
)
from .hand import (
    HandConfiguration,
    HandModel,
    RetargetConfig,
    RetargetResult,
    forward_kinematics,
    load_hand_model,
    pregrasp,
    retarget,
)
from .kernels import BACKEND as kernel_backend
from .rewards import (
    RewardConfig,
    SuccessThresholds,
    TaskState,
    lowest_point_height,
    total_reward,
)
from .shapespace import (
    FitConfig,
    ShapeSpace,
    build_shape_space,
    decode,
    energy,
    energy_gradient,
    fit_latent,
)
from .transfer import (
    GraspDemonstration,
    TransferredGrasp,
    ablation_canonical,
    ablation_wrist_only,
    load_demonstration,
    task_space_distance,
    transfer_keypoints,
)

__version__ = "0.1.0"

__all__ = [
    "CpdConfig",
    "DeformationField",
    "apply_deformation",
    "register_nonrigid",
    "GraspFieldError",
    "InvalidParameterError",
    "NumericFailureError",
    "ParseError",
    "DegenerateViewError",
    "NormalizationParams",
    "Pose",
    "chamfer_distance",
    "denormalize",
    "farthest_point_sample",
    "gaussian_kernel_matrix",
    "normalize",
    "HandConfiguration",
    "HandModel",
    "RetargetConfig",
    "RetargetResult",
    "forward_kinematics",
    "load_hand_model",
    "pregrasp",
    "retarget",
    "kernel_backend",
    "RewardConfig",
    "SuccessThresholds",
    "TaskState",
    "lowest_point_height",
    "total_reward",
    "FitConfig",
    "ShapeSpace",
    "build_shape_space",
    "decode",
    "energy",
    "energy_gradient",
    "fit_latent",
    "GraspDemonstration",
    "TransferredGrasp",
    "ablation_canonical",
    "ablation_wrist_only",
    "load_demonstration",
    "task_space_distance",
    "transfer_keypoints",
    "__version__",
]
