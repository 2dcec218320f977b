"""Regenerate the bundled hand models and per-family canonical grasp demos.

Run from the repo root: python3 tools/gen_fixtures.py
"""

import sys
from pathlib import Path

import numpy as np

SRC = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC))

from graspfield.assets import canonical_instance
from graspfield.geometry import Pose
from graspfield.hand import (
    HandConfiguration,
    forward_kinematics,
    hand_model_from_dict,
    hand_model_to_dict,
)
from graspfield.serialization import write_json
from graspfield.transfer import GraspDemonstration, demonstration_to_dict

DATA = SRC / "graspfield" / "data"


def toy2_doc():
    return {
        "schema": "graspfield.hand_model/1",
        "name": "toy2",
        "joints": [
            {
                "name": "j1",
                "parent": None,
                "origin": {"position": [0.05, 0.02, 0.0], "orientation": [1, 0, 0, 0]},
                "axis": [0, 0, 1],
                "limits": [-1.5707963267948966, 1.5707963267948966],
            },
            {
                "name": "j2",
                "parent": None,
                "origin": {"position": [0.05, -0.02, 0.0], "orientation": [1, 0, 0, 0]},
                "axis": [0, 0, 1],
                "limits": [-1.5707963267948966, 1.5707963267948966],
            },
        ],
        "keypoints": [
            {"name": "palm", "parent": None, "offset": [0.0, 0.0, 0.0]},
            {"name": "tip1", "parent": "j1", "offset": [0.1, 0.0, 0.0]},
            {"name": "tip2", "parent": "j2", "offset": [0.1, 0.0, 0.0]},
        ],
        "palm_normal": [0, 0, 1],
        "open_configuration": [0.0, 0.0],
    }


def anthro5_doc():
    joints = []
    keypoints = [{"name": "palm", "parent": None, "offset": [0.06, 0.0, 0.01]}]
    fingers = [("index", 0.027), ("middle", 0.009), ("ring", -0.009), ("pinky", -0.027)]
    for name, y in fingers:
        mimic_mcp = {"joint": "ring_mcp", "ratio": 1.0} if name == "pinky" else None
        joints.append(
            {
                "name": f"{name}_mcp",
                "parent": None,
                "origin": {"position": [0.09, y, 0.0], "orientation": [1, 0, 0, 0]},
                "axis": [0, -1, 0],
                "limits": [-0.1, 1.7],
                **({"mimic": mimic_mcp} if mimic_mcp else {}),
            }
        )
        pip_source = "ring_mcp" if name == "pinky" else f"{name}_mcp"
        joints.append(
            {
                "name": f"{name}_pip",
                "parent": f"{name}_mcp",
                "origin": {"position": [0.045, 0.0, 0.0], "orientation": [1, 0, 0, 0]},
                "axis": [0, -1, 0],
                "limits": [-0.1, 1.9],
                "mimic": {"joint": pip_source, "ratio": 0.85},
            }
        )
        keypoints += [
            {"name": f"{name}_proximal", "parent": f"{name}_mcp", "offset": [0.025, 0.0, 0.006]},
            {"name": f"{name}_middle", "parent": f"{name}_pip", "offset": [0.012, 0.0, 0.006]},
            {"name": f"{name}_distal", "parent": f"{name}_pip", "offset": [0.028, 0.0, 0.006]},
        ]
    joints += [
        {
            "name": "thumb_opp",
            "parent": None,
            "origin": {"position": [0.03, 0.035, 0.0], "orientation": [1, 0, 0, 0]},
            "axis": [1, 0, 0],
            "limits": [-0.1, 1.6],
        },
        {
            "name": "thumb_mcp",
            "parent": "thumb_opp",
            "origin": {"position": [0.0, 0.035, 0.0], "orientation": [1, 0, 0, 0]},
            "axis": [0, 0, -1],
            "limits": [-0.1, 1.6],
        },
        {
            "name": "thumb_ip",
            "parent": "thumb_mcp",
            "origin": {"position": [0.0, 0.035, 0.0], "orientation": [1, 0, 0, 0]},
            "axis": [0, 0, -1],
            "limits": [-0.1, 1.7],
            "mimic": {"joint": "thumb_mcp", "ratio": 0.8},
        },
    ]
    keypoints += [
        {"name": "thumb_proximal", "parent": "thumb_mcp", "offset": [0.0, 0.02, 0.006]},
        {"name": "thumb_middle", "parent": "thumb_ip", "offset": [0.0, 0.012, 0.006]},
        {"name": "thumb_distal", "parent": "thumb_ip", "offset": [0.0, 0.026, 0.006]},
    ]
    return {
        "schema": "graspfield.hand_model/1",
        "name": "anthro5",
        "joints": joints,
        "keypoints": keypoints,
        "palm_normal": [0, 0, 1],
        "open_configuration": [0.0, 0.0, 0.0, 0.0, 0.0],
    }


def quat_from_matrix(r):
    w = np.sqrt(max(0.0, 1.0 + r[0, 0] + r[1, 1] + r[2, 2])) / 2.0
    x = (r[2, 1] - r[1, 2]) / (4 * w)
    y = (r[0, 2] - r[2, 0]) / (4 * w)
    z = (r[1, 0] - r[0, 1]) / (4 * w)
    return [w, x, y, z]


def orientation(cols):
    r = np.array(cols, dtype=float).T
    assert abs(np.linalg.det(r) - 1.0) < 1e-9, np.linalg.det(r)
    return quat_from_matrix(r)


# Wrist axis images (x = finger direction, z = palm normal) per family.
DEMO_POSES = {
    "ellipsoid_mugs": {
        # side grasp: fingers up the mug wall, palm toward +x
        "cols": [[0, 1, 0], [0, 0, 1], [1, 0, 0]],
        "position": [-0.072, -0.070, 0.0],
        "angles": [0.75, 0.80, 0.75, 1.05, 0.55],  # index, middle, ring, thumb_opp, thumb_mcp
    },
    "stretched_hammers": {
        # handle grasp from below, fingers across the handle
        "cols": [[0, -1, 0], [1, 0, 0], [0, 0, 1]],
        "position": [0.10, 0.088, -0.030],
        "angles": [1.05, 1.10, 1.05, 1.15, 0.75],
    },
    "scaled_drill_blanks": {
        # grip grasp: palm toward +x, fingers wrap the pistol grip
        "cols": [[0, 1, 0], [0, 0, 1], [1, 0, 0]],
        "position": [-0.062, -0.068, -0.058],
        "angles": [0.95, 1.00, 0.95, 1.10, 0.65],
    },
}


def report_demo(family, model, config, cloud):
    fk = forward_kinematics(model, config)
    pts = np.stack(list(fk.values()))
    from graspfield.kernels import sqdist_matrix

    nn = np.sqrt(sqdist_matrix(np.ascontiguousarray(pts), np.ascontiguousarray(cloud)).min(axis=1))
    print(f"{family}: keypoint->surface distance mean={nn.mean()*100:.2f}cm max={nn.max()*100:.2f}cm")
    return fk


def main():
    DATA.mkdir(exist_ok=True)
    for doc in (toy2_doc(), anthro5_doc()):
        model = hand_model_from_dict(doc)  # validates
        write_json(hand_model_to_dict(model), DATA / f"hand_{model.name}.json")
        print(f"wrote hand_{model.name}.json ({model.num_actuated} actuated, "
              f"{len(model.joints)} joints, {len(model.keypoints)} keypoints)")

    model = hand_model_from_dict(anthro5_doc())
    for family, spec in DEMO_POSES.items():
        pose = Pose(spec["position"], orientation(spec["cols"]))
        config = HandConfiguration(pose, np.array(spec["angles"]))
        cloud = canonical_instance(family)
        fk = report_demo(family, model, config, cloud)
        demo = GraspDemonstration(
            keypoints=fk,
            wrist_pose=pose,
            joint_angles=config.joint_angles,
            hand_model_id=model.name,
        )
        write_json(demonstration_to_dict(demo), DATA / f"demo_{family}.json")
        print(f"wrote demo_{family}.json")


if __name__ == "__main__":
    main()
