"""Shaped reward terms and success criteria for the three tool-use tasks.

Pure functions on task states: nothing here steps an environment. The
distance scalars (keypoint mismatch, nail depth increment, hammer-to-nail
distance, lift shortfall) are supplied by the caller; only the
lowest-surface-point height is computed here since its definition is
geometric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .geometry import Pose, as_point_set, pose_angular_distance

TASKS = ("place_mug", "position_drill", "drive_nail")

DEFAULT_WEIGHTS = {
    "r_pose": 25.0,
    "r_success": 100.0,
    "r_dist": 0.25,
    "r_depth": 100.0,
    "r_kp": 0.001,
    "r_lift": 0.05,
}


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 10.0
    beta: float = 1.0
    epsilon: float = 0.025
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise InvalidParameterError("epsilon must be positive")
        merged = dict(DEFAULT_WEIGHTS)
        for name, value in dict(self.weights).items():
            if name not in DEFAULT_WEIGHTS:
                raise InvalidParameterError(f"unknown reward term {name!r}")
            merged[name] = float(value)
        if not all(np.isfinite(v) for v in merged.values()):
            raise InvalidParameterError("reward weights must be finite")
        object.__setattr__(self, "weights", merged)


@dataclass(frozen=True)
class SuccessThresholds:
    distance: float = 0.03  # meters
    angle: float = 0.2  # radians
    nail_depth: float = 0.075  # meters

    def __post_init__(self):
        for name in ("distance", "angle", "nail_depth"):
            if not getattr(self, name) > 0.0:
                raise InvalidParameterError(f"{name} threshold must be positive")


@dataclass(frozen=True)
class TaskState:
    """Snapshot of the quantities the reward terms consume.

    ``keypoint_distance_sum``, ``nail_depth_delta``, ``hammer_nail_distance``
    and ``lift_shortfall`` come from the caller's environment;
    ``nail_depth_total`` feeds the drive-nail success criterion.
    """

    tool_pose: Pose
    target_pose: Pose
    keypoint_distance_sum: float = 0.0
    tool_surface_points: np.ndarray | None = None
    nail_depth_delta: float = 0.0
    nail_depth_total: float = 0.0
    hammer_nail_distance: float = 0.0
    table_height: float = 0.0
    lift_shortfall: float = 0.0

    def __post_init__(self):
        for name in ("keypoint_distance_sum", "hammer_nail_distance", "lift_shortfall"):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and value >= 0.0):
                raise InvalidParameterError(f"{name} must be a finite nonnegative scalar")
        for name in ("nail_depth_delta", "nail_depth_total", "table_height"):
            if not np.isfinite(float(getattr(self, name))):
                raise InvalidParameterError(f"{name} must be finite")
        if self.tool_surface_points is not None:
            object.__setattr__(
                self, "tool_surface_points", as_point_set(self.tool_surface_points)
            )


def r_pose(state: TaskState, cfg: RewardConfig = RewardConfig()) -> float:
    """exp(-alpha * ||position error|| - beta * angular error), in (0, 1]."""
    dp = float(np.linalg.norm(state.tool_pose.position - state.target_pose.position))
    dang = pose_angular_distance(state.tool_pose, state.target_pose)
    return float(np.exp(-cfg.alpha * dp - cfg.beta * dang))


def r_success(state: TaskState, thresholds: SuccessThresholds = SuccessThresholds()) -> int:
    """1 iff both pose errors are strictly inside their thresholds."""
    dp = float(np.linalg.norm(state.tool_pose.position - state.target_pose.position))
    dang = pose_angular_distance(state.tool_pose, state.target_pose)
    return int(dp < thresholds.distance and dang < thresholds.angle)


def success_drive_nail(
    state: TaskState, thresholds: SuccessThresholds = SuccessThresholds()
) -> int:
    """1 iff the nail has been driven strictly deeper than the threshold."""
    return int(state.nail_depth_total > thresholds.nail_depth)


def r_dist(state: TaskState, cfg: RewardConfig = RewardConfig()) -> float:
    """Reciprocal shaping of the hammer-to-nail distance."""
    return 1.0 / (cfg.epsilon + state.hammer_nail_distance)


def r_depth(state: TaskState) -> float:
    """Per-step nail depth increment, passed through verbatim."""
    return float(state.nail_depth_delta)


def r_kp(state: TaskState, cfg: RewardConfig = RewardConfig()) -> float:
    """Reciprocal shaping of the summed keypoint mismatch."""
    return 1.0 / (cfg.epsilon + state.keypoint_distance_sum)


def r_lift(state: TaskState, cfg: RewardConfig = RewardConfig()) -> float:
    """Reciprocal shaping of the lift shortfall (distance still to lift)."""
    return 1.0 / (cfg.epsilon + state.lift_shortfall)


def lowest_point_height(surface_points, tool_pose: Pose, table_height: float) -> float:
    """Height of the tool's lowest surface point above the table.

    ``surface_points`` are in the tool frame; they are moved by the tool pose
    and the minimum world z minus the table height is returned. Negative
    values mean penetration; clamping is the caller's choice.
    """
    pts = as_point_set(surface_points)
    world = tool_pose.apply(pts)
    return float(world[:, 2].min() - table_height)


def total_reward(
    state: TaskState,
    cfg: RewardConfig = RewardConfig(),
    thresholds: SuccessThresholds = SuccessThresholds(),
    task: str = "place_mug",
) -> float:
    """Weighted sum of the task-specific terms plus the shared grasping terms."""
    if task not in TASKS:
        raise InvalidParameterError(f"unknown task {task!r}, expected one of {TASKS}")
    w = cfg.weights
    total = w["r_kp"] * r_kp(state, cfg) + w["r_lift"] * r_lift(state, cfg)
    if task in ("place_mug", "position_drill"):
        total += w["r_pose"] * r_pose(state, cfg)
        total += w["r_success"] * r_success(state, thresholds)
    else:
        total += w["r_dist"] * r_dist(state, cfg)
        total += w["r_depth"] * r_depth(state)
    return float(total)
