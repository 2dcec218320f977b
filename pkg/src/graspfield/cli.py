"""Command-line front end.

Subcommands: build, fit, transfer, eval-ablations, reward, synth. Outputs
are deterministic for fixed seeds and flags; exit codes are 0 (success),
1 (domain failure) and 2 (I/O or parse failure). Set GRASPFIELD_LOG to a
level name (debug/info/...) for progress logs on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import archive, assets, pipeline, rewards
from .cpd import CpdConfig
from .errors import (
    DegenerateViewError,
    InvalidParameterError,
    NumericFailureError,
    ParseError,
)
from .geometry import Pose, farthest_point_sample
from .hand import HandConfiguration, load_hand_model
from .serialization import canonical_json, read_json, take, write_json
from .shapespace import DEFAULT_SIGMA_SCHEDULE, FitConfig, build_shape_space, decode
from .transfer import load_demonstration, transferred_grasp_to_dict

log = logging.getLogger(__name__)

LATENT_SCHEMA = "graspfield.latent_fit/1"
REPORT_SCHEMA = "graspfield.report/1"
STATES_SCHEMA = "graspfield.task_states/1"
MANIFEST_SCHEMA = "graspfield.synth_manifest/1"

CLOUD_EXTENSIONS = (".xyz", ".ply")


def _cloud_files(directory: Path) -> list:
    named = sorted(
        p for p in directory.iterdir()
        if p.suffix.lower() in CLOUD_EXTENSIONS and p.stem.startswith("instance_")
    )
    if named:
        return named
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in CLOUD_EXTENSIONS)


def _pose_to_dict(pose: Pose) -> dict:
    return {"position": list(pose.position), "orientation": list(pose.orientation)}


def _pose_from_dict(obj, context: str) -> Pose:
    body = take(obj, required={"position", "orientation"}, context=context)
    return Pose(body["position"], body["orientation"])


def _config_to_dict(config: HandConfiguration) -> dict:
    return {
        "wrist_pose": _pose_to_dict(config.wrist_pose),
        "joint_angles": list(config.joint_angles),
    }


def _keypoints_to_list(keypoints: dict) -> list:
    return [{"name": n, "position": list(p)} for n, p in keypoints.items()]


def _parse_schedule(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise InvalidParameterError(f"bad sigma schedule {text!r}; expected comma-separated floats")


def _check_demo_model(demo, model):
    if demo.hand_model_id != model.name:
        raise InvalidParameterError(
            f"demonstration targets hand model {demo.hand_model_id!r}, got {model.name!r}"
        )
    if demo.joint_angles.shape[0] != model.num_actuated:
        raise InvalidParameterError(
            f"demonstration has {demo.joint_angles.shape[0]} joint angles, "
            f"model {model.name!r} expects {model.num_actuated}"
        )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_build(args) -> int:
    canonical = assets.load_point_cloud(args.canonical)
    directory = Path(args.training_dir)
    files = _cloud_files(directory)
    if len(files) < 2:
        raise InvalidParameterError(f"need >= 2 training instances, found {len(files)}")
    training = [assets.load_point_cloud(p) for p in files]
    if args.subsample is not None:
        canonical = farthest_point_sample(canonical, min(args.subsample, len(canonical)), args.seed)
        training = [
            farthest_point_sample(t, min(args.subsample, len(t)), args.seed) for t in training
        ]

    config = CpdConfig(
        beta=args.beta,
        lam=getattr(args, "lambda"),
        outlier_weight=args.outlier_weight,
        seed=args.seed,
    )
    report: dict = {}
    space = build_shape_space(
        canonical, training, config, variance_target=args.variance_target, report=report
    )

    print(f"{'instance':>9} {'file':<28} {'sigma2':>12} {'iters':>6}")
    for reg, path in zip(report["registrations"], files):
        print(f"{reg['instance']:>9d} {path.name:<28} {reg['sigma2']:>12.4e} {reg['iterations']:>6d}")
    print(f"{'component':>9} {'singular':>12} {'cum. explained':>15}")
    explained = report["explained_variance"] or [1.0] * len(report["singular_values"])
    for i, (s, r) in enumerate(zip(report["singular_values"], explained)):
        marker = "*" if i < space.latent_dim else " "
        print(f"{i:>9d} {s:>12.5e} {r:>14.4%} {marker}")
    print(f"kept {space.latent_dim} components (target {args.variance_target:.2f})")

    digest_source = canonical_json(
        {
            "beta": args.beta,
            "lambda": getattr(args, "lambda"),
            "outlier_weight": args.outlier_weight,
            "variance_target": args.variance_target,
            "subsample": args.subsample,
            "seed": args.seed,
            "training": [p.name for p in files],
        }
    )
    digest = hashlib.sha256(digest_source.encode("utf-8")).hexdigest()
    archive.save_shape_space(space, args.out_archive, build_digest=digest)
    log.info("wrote archive %s (digest %s)", args.out_archive, digest[:12])
    return 0


def _fit_config_from_args(args) -> FitConfig:
    return FitConfig(sigma_schedule=_parse_schedule(args.sigma_schedule))


def cmd_fit(args) -> int:
    space = archive.load_shape_space(args.archive)
    observation = assets.load_point_cloud(args.observation)
    outcome = pipeline.fit_observation(space, observation, _fit_config_from_args(args))

    out_latent = Path(args.out_latent)
    write_json(
        {
            "schema": LATENT_SCHEMA,
            "code": list(outcome.code),
            "final_energy": outcome.final_energy,
            "stage_energies": [[float(e) for e in stage] for stage in outcome.trace],
            "sigma_schedule": list(_parse_schedule(args.sigma_schedule)),
            "partial": bool(args.partial),
            "chamfer_to_observation": outcome.chamfer_to_observation,
        },
        out_latent,
    )
    deformed_path = Path(args.deformed_cloud) if args.deformed_cloud else out_latent.with_suffix(".ply")
    from .cpd import apply_deformation

    assets.save_point_cloud(apply_deformation(outcome.field, space.canonical), deformed_path)
    print(
        f"fit: energy={outcome.final_energy:.6f} "
        f"chamfer={outcome.chamfer_to_observation:.6f} -> {out_latent}"
    )
    return 0


def _field_from_input(space, path, fit_config):
    """A latent-fit JSON decodes directly; anything else is fit as a cloud."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = read_json(path)
        body = take(
            doc,
            required={"schema", "code", "final_energy"},
            optional={"stage_energies", "sigma_schedule", "partial", "chamfer_to_observation"},
            context="latent file",
        )
        if body["schema"] != LATENT_SCHEMA:
            raise ParseError(f"unsupported latent schema {body['schema']!r}", path=str(path))
        return decode(space, np.asarray(body["code"], dtype=np.float64)), None
    observation = assets.load_point_cloud(path)
    outcome = pipeline.fit_observation(space, observation, fit_config)
    return outcome.field, outcome


def cmd_transfer(args) -> int:
    space = archive.load_shape_space(args.archive)
    demo = load_demonstration(args.demo)
    model = load_hand_model(args.hand_model)
    _check_demo_model(demo, model)
    field, fit_outcome = _field_from_input(space, args.observation, _fit_config_from_args(args))

    outcome = pipeline.transfer_grasp(
        field,
        demo,
        model,
        mode=args.ablation,
        pregrasp_offset=args.pregrasp_offset,
        pregrasp_interpolation=args.interpolation,
    )
    doc = {
        "schema": "graspfield.grasp_result/1",
        "ablation": outcome.mode,
        "transferred": transferred_grasp_to_dict(outcome.grasp),
        "targets": transferred_grasp_to_dict(outcome.targets),
        "hand_configuration": _config_to_dict(outcome.configuration),
        "pregrasp_configuration": _config_to_dict(outcome.pregrasp_configuration),
        "achieved_keypoints": _keypoints_to_list(outcome.achieved_keypoints),
        "task_space_distance_m": outcome.distance,
        "retarget": (
            None
            if outcome.retarget_residual is None
            else {
                "residual_m": outcome.retarget_residual,
                "iterations": outcome.retarget_iterations,
            }
        ),
        "fit": (
            None
            if fit_outcome is None
            else {
                "code": list(fit_outcome.code),
                "final_energy": fit_outcome.final_energy,
                "chamfer_to_observation": fit_outcome.chamfer_to_observation,
            }
        ),
    }
    write_json(doc, args.out_grasp)
    print(f"{args.ablation}: task-space distance {outcome.distance * 100.0:.3f} cm -> {args.out_grasp}")
    return 0


def cmd_eval_ablations(args) -> int:
    space = archive.load_shape_space(args.archive)
    demo = load_demonstration(args.demo)
    model = load_hand_model(args.hand_model)
    _check_demo_model(demo, model)
    files = _cloud_files(Path(args.instances_dir))
    if not files:
        raise InvalidParameterError(f"no point clouds in {args.instances_dir}")
    instances = [assets.load_point_cloud(p) for p in files]

    report = pipeline.evaluate_ablations(
        space,
        demo,
        model,
        instances,
        fit_config=_fit_config_from_args(args),
        pregrasp_offset=args.pregrasp_offset,
        pregrasp_interpolation=args.interpolation,
    )
    summary = report.summary()
    doc = {
        "schema": REPORT_SCHEMA,
        "kind": "ablation_table",
        "instances": [p.name for p in files],
        "methods": {
            mode: {
                "mean_m": stats["mean_m"],
                "std_m": stats["std_m"],
                "mean_cm": stats["mean_m"] * 100.0,
                "std_cm": stats["std_m"] * 100.0,
            }
            for mode, stats in summary.items()
        },
        "rows": [
            {
                "instance": files[r.instance].name,
                "method": r.mode,
                "task_space_distance_m": r.distance,
                "fit_energy": r.fit_energy,
                "fit_chamfer_m": r.fit_chamfer,
                "retarget_residual_m": r.retarget_residual,
            }
            for r in report.rows
        ],
    }
    write_json(doc, args.out_report)
    print(f"{'method':>8} {'mean cm':>10} {'std cm':>10}")
    for mode in pipeline.ABLATION_MODES:
        stats = summary.get(mode)
        if stats:
            print(f"{mode:>8} {stats['mean_m'] * 100:>10.3f} {stats['std_m'] * 100:>10.3f}")
    return 0


def _state_from_dict(obj, context: str) -> rewards.TaskState:
    body = take(
        obj,
        required={"tool_pose", "target_pose"},
        optional={
            "keypoint_distance_sum",
            "tool_surface_points",
            "nail_depth_delta",
            "nail_depth_total",
            "hammer_nail_distance",
            "table_height",
            "lift_shortfall",
        },
        context=context,
    )
    return rewards.TaskState(
        tool_pose=_pose_from_dict(body["tool_pose"], f"{context}: tool_pose"),
        target_pose=_pose_from_dict(body["target_pose"], f"{context}: target_pose"),
        keypoint_distance_sum=body.get("keypoint_distance_sum", 0.0),
        tool_surface_points=(
            np.asarray(body["tool_surface_points"], dtype=np.float64)
            if body.get("tool_surface_points") is not None
            else None
        ),
        nail_depth_delta=body.get("nail_depth_delta", 0.0),
        nail_depth_total=body.get("nail_depth_total", 0.0),
        hammer_nail_distance=body.get("hammer_nail_distance", 0.0),
        table_height=body.get("table_height", 0.0),
        lift_shortfall=body.get("lift_shortfall", 0.0),
    )


def cmd_reward(args) -> int:
    doc = read_json(args.states)
    body = take(doc, required={"schema", "states"}, context="states file")
    if body["schema"] != STATES_SCHEMA:
        raise ParseError(f"unsupported states schema {body['schema']!r}", path=str(args.states))

    weights = {}
    for item in args.weight or []:
        if "=" not in item:
            raise InvalidParameterError(f"--weight expects name=value, got {item!r}")
        name, value = item.split("=", 1)
        weights[name] = float(value)
    cfg = rewards.RewardConfig(
        alpha=args.alpha, beta=args.beta, epsilon=args.epsilon, weights=weights
    )
    thresholds = rewards.SuccessThresholds(
        distance=args.d_bar, angle=args.theta_bar, nail_depth=args.nail_depth_bar
    )

    rows = []
    for index, state_doc in enumerate(body["states"]):
        state = _state_from_dict(state_doc, f"state {index}")
        terms = {
            "r_kp": rewards.r_kp(state, cfg),
            "r_lift": rewards.r_lift(state, cfg),
        }
        if args.task in ("place_mug", "position_drill"):
            terms["r_pose"] = rewards.r_pose(state, cfg)
            terms["r_success"] = float(rewards.r_success(state, thresholds))
            success = bool(rewards.r_success(state, thresholds))
        else:
            terms["r_dist"] = rewards.r_dist(state, cfg)
            terms["r_depth"] = rewards.r_depth(state)
            success = bool(rewards.success_drive_nail(state, thresholds))
        row = {
            "index": index,
            "terms": terms,
            "total": rewards.total_reward(state, cfg, thresholds, args.task),
            "success": success,
        }
        if state.tool_surface_points is not None:
            row["lowest_point_height_m"] = rewards.lowest_point_height(
                state.tool_surface_points, state.tool_pose, state.table_height
            )
        rows.append(row)

    out_doc = {"schema": REPORT_SCHEMA, "kind": "reward_batch", "task": args.task, "rows": rows}
    if args.out:
        write_json(out_doc, args.out)
    else:
        sys.stdout.write(canonical_json(out_doc))
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    canonical, instances, params = assets.generate_synthetic_category(
        args.family, args.count, args.seed
    )
    files = {"canonical": "canonical.xyz", "instances": [], "partial_views": []}
    assets.save_point_cloud(canonical, out_dir / "canonical.xyz")
    for i, cloud in enumerate(instances):
        name = f"instance_{i:03d}.xyz"
        assets.save_point_cloud(cloud, out_dir / name)
        files["instances"].append(name)
        if args.partial_view:
            direction = np.asarray([float(v) for v in args.view.split(",")])
            centroid = cloud.mean(axis=0)
            spec = assets.ViewSpec(
                viewpoint=centroid + direction, mode=args.view_mode,
            )
            partial = assets.synthesize_partial_view(cloud, spec)
            pname = f"instance_{i:03d}_partial.xyz"
            assets.save_point_cloud(partial, out_dir / pname)
            files["partial_views"].append(pname)
    write_json(
        {
            "schema": MANIFEST_SCHEMA,
            "family": args.family,
            "count": args.count,
            "seed": args.seed,
            "ground_truth_params": params,
            "files": files,
        },
        out_dir / "manifest.json",
    )
    print(f"wrote {args.count} instances of {args.family} to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_fit_flags(parser):
    parser.add_argument(
        "--sigma-schedule",
        default=",".join(str(s) for s in DEFAULT_SIGMA_SCHEDULE),
        help="comma-separated descending sigma stages, normalized units",
    )


def _add_transfer_flags(parser):
    parser.add_argument("--pregrasp-offset", type=float, default=0.10, metavar="METERS")
    parser.add_argument("--interpolation", type=float, default=0.5, metavar="FRACTION")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graspfield",
        description="Generalize a demonstrated multi-fingered grasp to novel object instances.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a shape-space archive from training clouds")
    p.add_argument("canonical", help="canonical instance cloud (.xyz/.ply)")
    p.add_argument("training_dir", help="directory of training instance clouds")
    p.add_argument("out_archive")
    p.add_argument("--beta", type=float, default=2.0, help="kernel width, normalized units")
    p.add_argument("--lambda", type=float, default=2.0, help="coherence regularization weight")
    p.add_argument("--outlier-weight", type=float, default=0.1)
    p.add_argument("--variance-target", type=float, default=0.95)
    p.add_argument("--subsample", type=int, default=None, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("fit", help="fit latent shape coordinates to an observation")
    p.add_argument("archive")
    p.add_argument("observation", help="observed cloud (.xyz/.ply), full or partial")
    p.add_argument("out_latent", help="output latent-fit JSON")
    p.add_argument("--deformed-cloud", default=None, help="output PLY (default: alongside)")
    p.add_argument("--partial", action="store_true", help="mark the observation as partial")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("transfer", help="transfer a grasp demonstration to an instance")
    p.add_argument("archive")
    p.add_argument("observation", help="latent-fit JSON, or a cloud to fit first")
    p.add_argument("demo", help="grasp demonstration JSON (or builtin:<family>)")
    p.add_argument("hand_model", help="hand model JSON (or builtin:<name>)")
    p.add_argument("out_grasp")
    p.add_argument("--ablation", choices=pipeline.ABLATION_MODES, default="ours")
    _add_transfer_flags(p)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("eval-ablations", help="score ours/WP/CG over a category")
    p.add_argument("archive")
    p.add_argument("demo")
    p.add_argument("hand_model")
    p.add_argument("instances_dir")
    p.add_argument("out_report")
    _add_transfer_flags(p)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_eval_ablations)

    p = sub.add_parser("reward", help="evaluate shaped rewards on a batch of task states")
    p.add_argument("states", help="task-states JSON file")
    p.add_argument("--task", choices=rewards.TASKS, required=True)
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.025)
    p.add_argument("--weight", action="append", metavar="TERM=VALUE")
    p.add_argument("--d-bar", type=float, default=0.03)
    p.add_argument("--theta-bar", type=float, default=0.2)
    p.add_argument("--nail-depth-bar", type=float, default=0.075)
    p.add_argument("--out", default=None, help="write report here instead of stdout")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("synth", help="generate a synthetic benchmark category")
    p.add_argument("family", choices=assets.SYNTHETIC_FAMILIES)
    p.add_argument("count", type=int)
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partial-view", action="store_true")
    p.add_argument("--view", default="1.0,0.0,0.0", help="view direction from each centroid")
    p.add_argument(
        "--view-mode", choices=("halfspace", "hidden_point_removal"), default="halfspace"
    )
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("GRASPFIELD_LOG", "warning").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING))

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidParameterError, NumericFailureError, DegenerateViewError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
