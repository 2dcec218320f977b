"""Kinematic hand models: forward kinematics, task-space retargeting and
pre-grasp generation.

Models are trees of revolute joints loaded from JSON (two fixtures ship with
the package: ``toy2`` and ``anthro5``). Underactuation is expressed by
mimic couplings, so a configuration only carries angles for the actuated
joints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import InvalidParameterError, NumericFailureError, ParseError
from .geometry import Pose, quat_from_axis_angle, quat_multiply, quat_normalized

FD_STEP = 1e-6  # central-difference step for the retarget Jacobian

BUILTIN_HAND_MODELS = ("toy2", "anthro5")


@dataclass(frozen=True)
class Joint:
    name: str
    parent: str | None  # None = mounted on the wrist
    origin: Pose
    axis: np.ndarray
    limits: tuple[float, float]
    mimic: tuple[str, float] | None = None  # (actuated joint, ratio)

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        norm = float(np.linalg.norm(axis))
        if not np.isfinite(norm) or norm < 1e-9:
            raise InvalidParameterError(f"joint {self.name}: axis has zero norm")
        object.__setattr__(self, "axis", axis / norm)
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if not lo <= hi:
            raise InvalidParameterError(f"joint {self.name}: limits [{lo}, {hi}] inverted")
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True)
class Keypoint:
    name: str
    parent: str | None  # joint name, or None for the wrist frame
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "offset", np.asarray(self.offset, dtype=np.float64).reshape(3)
        )


class HandModel:
    """Immutable revolute-joint tree with named keypoint frames."""

    def __init__(self, name, joints, keypoints, palm_normal, open_configuration):
        self.name = str(name)
        self.joints = tuple(joints)
        self.keypoints = tuple(keypoints)

        seen = {}
        for j in self.joints:
            if j.name in seen:
                raise InvalidParameterError(f"duplicate joint name {j.name!r}")
            if j.parent is not None and j.parent not in seen:
                raise InvalidParameterError(
                    f"joint {j.name!r}: parent {j.parent!r} must be declared earlier"
                )
            seen[j.name] = j

        self.actuated_names = tuple(j.name for j in self.joints if j.mimic is None)
        actuated_index = {n: i for i, n in enumerate(self.actuated_names)}
        for j in self.joints:
            if j.mimic is not None and j.mimic[0] not in actuated_index:
                raise InvalidParameterError(
                    f"joint {j.name!r} mimics {j.mimic[0]!r}, which is not an actuated joint"
                )

        names = [k.name for k in self.keypoints]
        if len(set(names)) != len(names):
            raise InvalidParameterError("keypoint names must be unique")
        joint_index = {j.name: i for i, j in enumerate(self.joints)}
        for k in self.keypoints:
            if k.parent is not None and k.parent not in joint_index:
                raise InvalidParameterError(
                    f"keypoint {k.name!r}: unknown parent joint {k.parent!r}"
                )

        normal = np.asarray(palm_normal, dtype=np.float64).reshape(3)
        norm = float(np.linalg.norm(normal))
        if norm < 1e-9:
            raise InvalidParameterError("palm normal has zero norm")
        self.palm_normal = normal / norm

        open_cfg = np.asarray(open_configuration, dtype=np.float64).reshape(-1)
        if open_cfg.shape != (len(self.actuated_names),):
            raise InvalidParameterError(
                f"open configuration has {open_cfg.shape[0]} angles, "
                f"model has {len(self.actuated_names)} actuated joints"
            )
        self.open_configuration = open_cfg

        # Flat FK plan: per-joint parent row (-1 = wrist), origin rotation /
        # translation, axis, and the actuated source feeding each joint.
        self._parent_row = np.array(
            [-1 if j.parent is None else joint_index[j.parent] for j in self.joints],
            dtype=np.int64,
        )
        self._origin_rot = np.stack(
            [_quat_to_matrix(j.origin.orientation) for j in self.joints]
        ) if self.joints else np.zeros((0, 3, 3))
        self._origin_pos = np.stack([j.origin.position for j in self.joints]) if self.joints else np.zeros((0, 3))
        self._axes = np.stack([j.axis for j in self.joints]) if self.joints else np.zeros((0, 3))
        src, ratio = [], []
        for j in self.joints:
            if j.mimic is None:
                src.append(actuated_index[j.name])
                ratio.append(1.0)
            else:
                src.append(actuated_index[j.mimic[0]])
                ratio.append(j.mimic[1])
        self._angle_source = np.array(src, dtype=np.int64)
        self._angle_ratio = np.array(ratio)
        self._kp_parent = np.array(
            [-1 if k.parent is None else joint_index[k.parent] for k in self.keypoints],
            dtype=np.int64,
        )
        self._kp_offset = np.stack([k.offset for k in self.keypoints]) if self.keypoints else np.zeros((0, 3))
        self._limits_lo = np.array([seen[n].limits[0] for n in self.actuated_names])
        self._limits_hi = np.array([seen[n].limits[1] for n in self.actuated_names])

    @property
    def num_actuated(self) -> int:
        return len(self.actuated_names)

    @property
    def keypoint_names(self) -> tuple:
        return tuple(k.name for k in self.keypoints)

    def clamp_angles(self, angles: np.ndarray) -> np.ndarray:
        return np.clip(angles, self._limits_lo, self._limits_hi)

    def check_configuration(self, config: "HandConfiguration") -> None:
        if config.joint_angles.shape != (self.num_actuated,):
            raise InvalidParameterError(
                f"configuration has {config.joint_angles.shape[0]} angles, "
                f"model {self.name!r} expects {self.num_actuated}"
            )


@dataclass(frozen=True)
class HandConfiguration:
    """Wrist pose plus the actuated joint angles."""

    wrist_pose: Pose
    joint_angles: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.joint_angles, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(q)):
            raise InvalidParameterError("joint angles contain non-finite values")
        object.__setattr__(self, "joint_angles", q)


@dataclass(frozen=True)
class RetargetConfig:
    max_iterations: int = 100
    damping: float = 1e-3
    residual_tolerance: float = 1e-6
    step_tolerance: float = 1e-10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be at least 1")
        for name in ("damping", "residual_tolerance", "step_tolerance"):
            if not getattr(self, name) > 0.0:
                raise InvalidParameterError(f"{name} must be positive")


@dataclass(frozen=True)
class RetargetResult:
    configuration: HandConfiguration
    residual: float  # root-mean-square keypoint distance, meters
    iterations: int
    objective_trace: list = field(default_factory=list)


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = axis
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def _keypoint_array(model: HandModel, config: HandConfiguration) -> np.ndarray:
    """World keypoint positions, ordered as model.keypoints."""
    n_joints = len(model.joints)
    rot = np.empty((n_joints, 3, 3))
    pos = np.empty((n_joints, 3))
    root_rot = _quat_to_matrix(config.wrist_pose.orientation)
    root_pos = config.wrist_pose.position
    full = model._angle_ratio * config.joint_angles[model._angle_source]
    for i in range(n_joints):
        p = model._parent_row[i]
        pr = root_rot if p < 0 else rot[p]
        pp = root_pos if p < 0 else pos[p]
        r_fixed = pr @ model._origin_rot[i]
        pos[i] = pp + pr @ model._origin_pos[i]
        rot[i] = r_fixed @ _axis_angle_matrix(model._axes[i], full[i])
    out = np.empty((len(model.keypoints), 3))
    for k in range(len(model.keypoints)):
        p = model._kp_parent[k]
        if p < 0:
            out[k] = root_pos + root_rot @ model._kp_offset[k]
        else:
            out[k] = pos[p] + rot[p] @ model._kp_offset[k]
    return out


def forward_kinematics(model: HandModel, config: HandConfiguration) -> dict:
    """World positions of every keypoint frame, keyed by keypoint name."""
    model.check_configuration(config)
    pts = _keypoint_array(model, config)
    return {k.name: pts[i] for i, k in enumerate(model.keypoints)}


def _target_items(targets):
    if hasattr(targets, "keypoints"):
        targets = targets.keypoints
    return {str(n): np.asarray(p, dtype=np.float64).reshape(3) for n, p in dict(targets).items()}


def retarget(
    model: HandModel,
    targets,
    init: HandConfiguration,
    cfg: RetargetConfig = RetargetConfig(),
) -> RetargetResult:
    """Levenberg-Marquardt fit of wrist pose and joint angles to keypoint targets.

    Minimizes the summed squared distance between target keypoints and their
    forward-kinematics positions over wrist position, a local axis-angle
    orientation increment, and the actuated joint angles. Joint limits are
    enforced by clamping each accepted step, damping doubles on rejected
    steps and halves on accepted ones, and unreachable targets simply end at
    the best configuration found (no error).
    """
    model.check_configuration(init)
    wanted = _target_items(targets)
    names = list(wanted)
    missing = sorted(set(names) - set(model.keypoint_names))
    if missing:
        raise InvalidParameterError(f"targets name unknown keypoints: {missing}")
    rows = [model.keypoint_names.index(n) for n in names]
    target_mat = np.stack([wanted[n] for n in names])
    k = len(names)

    pos = init.wrist_pose.position.copy()
    quat = init.wrist_pose.orientation.copy()
    q = model.clamp_angles(init.joint_angles)
    n_act = model.num_actuated
    dim = 6 + n_act

    def residual_at(p, o, angles):
        cfg_ = HandConfiguration(Pose(p, o), angles)
        return (_keypoint_array(model, cfg_)[rows] - target_mat).reshape(-1)

    def perturbed(p, o, angles, index, h):
        if index < 3:
            dp = p.copy()
            dp[index] += h
            return dp, o, angles
        if index < 6:
            rotvec = np.zeros(3)
            rotvec[index - 3] = h
            return p, quat_multiply(o, quat_from_axis_angle(rotvec)), angles
        dq = angles.copy()
        dq[index - 6] += h
        return p, o, dq

    res = residual_at(pos, quat, q)
    objective = float(res @ res)
    if not np.isfinite(objective):
        raise NumericFailureError("objective is non-finite at the initial configuration")
    trace = [objective]
    mu = cfg.damping
    iterations = 0

    for _ in range(cfg.max_iterations):
        if np.sqrt(objective / k) < cfg.residual_tolerance:
            break
        iterations += 1
        jac = np.empty((3 * k, dim))
        for col in range(dim):
            rp = residual_at(*perturbed(pos, quat, q, col, FD_STEP))
            rm = residual_at(*perturbed(pos, quat, q, col, -FD_STEP))
            jac[:, col] = (rp - rm) / (2.0 * FD_STEP)
        jtj = jac.T @ jac
        g = jac.T @ res

        accepted = False
        step = None
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + mu * np.eye(dim), -g)
            except np.linalg.LinAlgError:
                mu *= 2.0
                continue
            cand_pos = pos + step[:3]
            cand_quat = quat_normalized(
                quat_multiply(quat, quat_from_axis_angle(step[3:6]))
            )
            cand_q = model.clamp_angles(q + step[6:])
            cand_res = residual_at(cand_pos, cand_quat, cand_q)
            cand_obj = float(cand_res @ cand_res)
            if not np.isfinite(cand_obj):
                raise NumericFailureError("objective became non-finite during retargeting")
            if cand_obj < objective:
                pos, quat, q = cand_pos, cand_quat, cand_q
                res, objective = cand_res, cand_obj
                trace.append(objective)
                mu = max(mu * 0.5, 1e-15)
                accepted = True
                break
            mu *= 2.0
            if mu > 1e14:
                break
        if not accepted:
            break
        if np.linalg.norm(step) < cfg.step_tolerance:
            break

    result_cfg = HandConfiguration(Pose(pos, quat), q)
    return RetargetResult(result_cfg, float(np.sqrt(objective / k)), iterations, trace)


def pregrasp(
    model: HandModel,
    target: HandConfiguration,
    offset_distance: float = 0.10,
    interpolation: float = 0.5,
) -> HandConfiguration:
    """Stand-off configuration: wrist backed off along the palm normal,
    joint angles interpolated between the open and target configurations."""
    model.check_configuration(target)
    if offset_distance < 0.0:
        raise InvalidParameterError(f"offset distance must be nonnegative, got {offset_distance}")
    if not 0.0 <= interpolation <= 1.0:
        raise InvalidParameterError(f"interpolation must be in [0, 1], got {interpolation}")
    from .geometry import quat_rotate

    normal_world = quat_rotate(target.wrist_pose.orientation, model.palm_normal)
    position = target.wrist_pose.position - offset_distance * normal_world
    angles = (1.0 - interpolation) * model.open_configuration + interpolation * target.joint_angles
    return HandConfiguration(Pose(position, target.wrist_pose.orientation), angles)


# ---------------------------------------------------------------------------
# Serialization

_POSE_KEYS = {"position", "orientation"}


def _pose_from_dict(obj, context):
    if not isinstance(obj, dict) or set(obj) - _POSE_KEYS:
        raise ParseError(f"{context}: expected position/orientation keys")
    return Pose(obj.get("position", (0, 0, 0)), obj.get("orientation", (1, 0, 0, 0)))


def hand_model_from_dict(doc: dict, context: str = "hand model") -> HandModel:
    from .serialization import take

    body = take(
        doc,
        required={"schema", "name", "joints", "keypoints", "palm_normal", "open_configuration"},
        context=context,
    )
    if body["schema"] != "graspfield.hand_model/1":
        raise ParseError(f"{context}: unsupported schema {body['schema']!r}")
    joints = []
    for jd in body["joints"]:
        jj = take(
            jd,
            required={"name", "axis", "limits"},
            optional={"parent", "origin", "mimic"},
            context=f"{context}: joint",
        )
        mimic = None
        if jj.get("mimic") is not None:
            md = take(jj["mimic"], required={"joint", "ratio"}, context=f"{context}: mimic")
            mimic = (md["joint"], float(md["ratio"]))
        joints.append(
            Joint(
                name=jj["name"],
                parent=jj.get("parent"),
                origin=_pose_from_dict(jj.get("origin", {}), f"{context}: joint origin"),
                axis=jj["axis"],
                limits=tuple(jj["limits"]),
                mimic=mimic,
            )
        )
    keypoints = []
    for kd in body["keypoints"]:
        kk = take(kd, required={"name", "offset"}, optional={"parent"}, context=f"{context}: keypoint")
        keypoints.append(Keypoint(kk["name"], kk.get("parent"), kk["offset"]))
    try:
        return HandModel(
            body["name"], joints, keypoints, body["palm_normal"], body["open_configuration"]
        )
    except InvalidParameterError as exc:
        raise ParseError(f"{context}: {exc}") from exc


def hand_model_to_dict(model: HandModel) -> dict:
    joints = []
    for j in model.joints:
        jd = {
            "name": j.name,
            "parent": j.parent,
            "origin": {
                "position": list(j.origin.position),
                "orientation": list(j.origin.orientation),
            },
            "axis": list(j.axis),
            "limits": list(j.limits),
        }
        if j.mimic is not None:
            jd["mimic"] = {"joint": j.mimic[0], "ratio": j.mimic[1]}
        joints.append(jd)
    return {
        "schema": "graspfield.hand_model/1",
        "name": model.name,
        "joints": joints,
        "keypoints": [
            {"name": k.name, "parent": k.parent, "offset": list(k.offset)}
            for k in model.keypoints
        ],
        "palm_normal": list(model.palm_normal),
        "open_configuration": list(model.open_configuration),
    }


def load_hand_model(path) -> HandModel:
    """Load a hand model from JSON, or a bundled one via ``builtin:<name>``."""
    text, context = _read_maybe_builtin(path, "hand_")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=context, line=exc.lineno) from exc
    return hand_model_from_dict(doc, context=context)


def _read_maybe_builtin(path, prefix: str) -> tuple[str, str]:
    path = str(path)
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        resource = resources.files("graspfield").joinpath(f"data/{prefix}{name}.json")
        try:
            return resource.read_text(), path
        except FileNotFoundError:
            raise InvalidParameterError(f"no bundled resource named {name!r}") from None
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read(), path
