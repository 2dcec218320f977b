"""Grasp keypoint transfer and its two ablation baselines.

A demonstration is a set of named keypoints in the canonical object's frame
plus the hand configuration that produced them. Full transfer pushes every
keypoint through a fitted deformation field; the wrist-only ablation moves
just the wrist and keeps the finger configuration; the canonical ablation
returns the demonstration untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cpd import DeformationField, apply_deformation
from .errors import InvalidParameterError, ParseError
from .geometry import Pose, as_point
from .hand import HandConfiguration, HandModel, forward_kinematics

PROVENANCE_FULL = "full_transfer"
PROVENANCE_WRIST = "wrist_only"
PROVENANCE_CANONICAL = "canonical"


@dataclass(frozen=True)
class GraspDemonstration:
    """Named grasp keypoints plus the hand configuration behind them."""

    keypoints: dict
    wrist_pose: Pose
    joint_angles: np.ndarray
    hand_model_id: str

    def __post_init__(self):
        kp = {str(n): as_point(p) for n, p in dict(self.keypoints).items()}
        if not kp:
            raise InvalidParameterError("demonstration has no keypoints")
        object.__setattr__(self, "keypoints", kp)
        q = np.asarray(self.joint_angles, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(q)):
            raise InvalidParameterError("joint angles contain non-finite values")
        object.__setattr__(self, "joint_angles", q)

    def configuration(self) -> HandConfiguration:
        return HandConfiguration(self.wrist_pose, self.joint_angles)

    def keypoint_matrix(self) -> np.ndarray:
        return np.stack(list(self.keypoints.values()))


@dataclass(frozen=True)
class TransferredGrasp:
    keypoints: dict
    provenance: str

    def __post_init__(self):
        if self.provenance not in (PROVENANCE_FULL, PROVENANCE_WRIST, PROVENANCE_CANONICAL):
            raise InvalidParameterError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(
            self, "keypoints", {str(n): as_point(p) for n, p in dict(self.keypoints).items()}
        )


def transfer_keypoints(field: DeformationField, demo: GraspDemonstration) -> TransferredGrasp:
    """Map every demonstration keypoint through the deformation field."""
    moved = apply_deformation(field, demo.keypoint_matrix())
    names = list(demo.keypoints)
    return TransferredGrasp(dict(zip(names, moved)), PROVENANCE_FULL)


def ablation_wrist_only(
    field: DeformationField, demo: GraspDemonstration, model: HandModel
) -> tuple[TransferredGrasp, HandConfiguration]:
    """Displace only the wrist by the field; orientation and fingers stay
    canonical. Keypoints are reported as forward kinematics of the result."""
    wrist = demo.wrist_pose.position.reshape(1, 3)
    moved = apply_deformation(field, wrist)[0]
    config = HandConfiguration(Pose(moved, demo.wrist_pose.orientation), demo.joint_angles)
    keypoints = forward_kinematics(model, config)
    ordered = {n: keypoints[n] for n in demo.keypoints if n in keypoints}
    if set(ordered) != set(demo.keypoints):
        raise InvalidParameterError(
            "demonstration keypoints missing from the hand model: "
            f"{sorted(set(demo.keypoints) - set(keypoints))}"
        )
    return TransferredGrasp(ordered, PROVENANCE_WRIST), config


def ablation_canonical(demo: GraspDemonstration) -> tuple[TransferredGrasp, HandConfiguration]:
    """Return the demonstration unchanged (the CG baseline)."""
    return (
        TransferredGrasp(dict(demo.keypoints), PROVENANCE_CANONICAL),
        demo.configuration(),
    )


def task_space_distance(achieved, target: TransferredGrasp) -> float:
    """Mean Euclidean distance between matching named keypoints, meters."""
    achieved = {str(n): as_point(p) for n, p in dict(achieved).items()}
    extra = sorted(set(achieved) - set(target.keypoints))
    missing = sorted(set(target.keypoints) - set(achieved))
    if extra or missing:
        raise InvalidParameterError(
            f"keypoint name mismatch: extra={extra}, missing={missing}"
        )
    dists = [np.linalg.norm(achieved[n] - target.keypoints[n]) for n in target.keypoints]
    return float(np.mean(dists))


# ---------------------------------------------------------------------------
# Serialization

GRASP_SCHEMA = "graspfield.grasp/1"
TRANSFER_SCHEMA = "graspfield.transferred_grasp/1"


def demonstration_to_dict(demo: GraspDemonstration) -> dict:
    return {
        "schema": GRASP_SCHEMA,
        "hand_model_id": demo.hand_model_id,
        "wrist_pose": {
            "position": list(demo.wrist_pose.position),
            "orientation": list(demo.wrist_pose.orientation),
        },
        "joint_angles": list(demo.joint_angles),
        "keypoints": [
            {"name": n, "position": list(p)} for n, p in demo.keypoints.items()
        ],
    }


def demonstration_from_dict(doc: dict, context: str = "grasp file") -> GraspDemonstration:
    from .serialization import take

    body = take(
        doc,
        required={"schema", "hand_model_id", "wrist_pose", "joint_angles", "keypoints"},
        context=context,
    )
    if body["schema"] != GRASP_SCHEMA:
        raise ParseError(f"{context}: unsupported schema {body['schema']!r}")
    pose_d = take(body["wrist_pose"], required={"position", "orientation"}, context=context)
    keypoints = {}
    for kd in body["keypoints"]:
        kk = take(kd, required={"name", "position"}, context=f"{context}: keypoint")
        if kk["name"] in keypoints:
            raise ParseError(f"{context}: duplicate keypoint {kk['name']!r}")
        keypoints[kk["name"]] = kk["position"]
    try:
        return GraspDemonstration(
            keypoints=keypoints,
            wrist_pose=Pose(pose_d["position"], pose_d["orientation"]),
            joint_angles=body["joint_angles"],
            hand_model_id=body["hand_model_id"],
        )
    except InvalidParameterError as exc:
        raise ParseError(f"{context}: {exc}") from exc


def load_demonstration(path) -> GraspDemonstration:
    """Load a grasp demonstration JSON, or a bundled one via ``builtin:<family>``."""
    from .hand import _read_maybe_builtin

    text, context = _read_maybe_builtin(path, "demo_")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=context, line=exc.lineno) from exc
    return demonstration_from_dict(doc, context=context)


def transferred_grasp_to_dict(grasp: TransferredGrasp) -> dict:
    return {
        "schema": TRANSFER_SCHEMA,
        "provenance": grasp.provenance,
        "keypoints": [
            {"name": n, "position": list(p)} for n, p in grasp.keypoints.items()
        ],
    }


def transferred_grasp_from_dict(doc: dict, context: str = "transferred grasp") -> TransferredGrasp:
    from .serialization import take

    body = take(doc, required={"schema", "provenance", "keypoints"}, context=context)
    if body["schema"] != TRANSFER_SCHEMA:
        raise ParseError(f"{context}: unsupported schema {body['schema']!r}")
    keypoints = {}
    for kd in body["keypoints"]:
        kk = take(kd, required={"name", "position"}, context=f"{context}: keypoint")
        keypoints[kk["name"]] = kk["position"]
    try:
        return TransferredGrasp(keypoints, body["provenance"])
    except InvalidParameterError as exc:
        raise ParseError(f"{context}: {exc}") from exc
