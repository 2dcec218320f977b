"""Shared geometric primitives.

Point sets are plain float64 arrays of shape (N, 3); a point's identity is
its row index. Quaternions use (w, x, y, z) order and are kept canonical
(unit norm, nonnegative scalar part) so the angular metric
``2 * acos(|<a, b>|)`` is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidParameterError

_DEGENERATE_SCALE = 1e-12


def as_point(value) -> np.ndarray:
    p = np.asarray(value, dtype=np.float64).reshape(-1)
    if p.shape != (3,):
        raise InvalidParameterError(f"expected a 3-vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidParameterError("point has non-finite coordinates")
    return p


def as_point_set(value) -> np.ndarray:
    ps = np.ascontiguousarray(value, dtype=np.float64)
    if ps.ndim != 2 or ps.shape[1] != 3:
        raise InvalidParameterError(f"expected an (N, 3) point set, got shape {ps.shape}")
    if ps.shape[0] == 0:
        raise InvalidParameterError("point set is empty")
    if not np.all(np.isfinite(ps)):
        raise InvalidParameterError("point set has non-finite coordinates")
    return ps


# ---------------------------------------------------------------------------
# Quaternions


def quat_normalized(q) -> np.ndarray:
    """Unit quaternion with canonical sign (scalar part >= 0)."""
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape != (4,):
        raise InvalidParameterError(f"expected a quaternion (w, x, y, z), got shape {q.shape}")
    norm = float(np.linalg.norm(q))
    if not np.isfinite(norm) or norm < 1e-9:
        raise InvalidParameterError("quaternion norm is zero or non-finite")
    q = q / norm
    if q[0] < 0.0:
        q = -q
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate one vector or an (N, 3) stack by a unit quaternion."""
    w = q[0]
    u = q[1:]
    v = np.asarray(v, dtype=np.float64)
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_from_axis_angle(rotvec) -> np.ndarray:
    """Exponential map: rotation vector (axis * angle) to quaternion."""
    r = np.asarray(rotvec, dtype=np.float64).reshape(3)
    angle = float(np.linalg.norm(r))
    if angle < 1e-12:
        # First-order expansion keeps the map smooth through zero.
        q = np.array([1.0, 0.5 * r[0], 0.5 * r[1], 0.5 * r[2]])
        return q / np.linalg.norm(q)
    axis = r / angle
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * axis
    return q


def quat_angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Angular distance 2*acos(|<a, b>|), in [0, pi]."""
    dot = min(1.0, abs(float(np.dot(a, b))))
    return 2.0 * float(np.arccos(dot))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation by ``orientation`` then ``position`` offset."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", as_point(self.position))
        object.__setattr__(self, "orientation", quat_normalized(self.orientation))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, points) + self.position

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return Pose(
            self.apply(other.position),
            quat_multiply(self.orientation, other.orientation),
        )

    def inverse(self) -> "Pose":
        inv = quat_conjugate(self.orientation)
        return Pose(-quat_rotate(inv, self.position), inv)


def pose_angular_distance(a: Pose, b: Pose) -> float:
    return quat_angle_between(a.orientation, b.orientation)


# ---------------------------------------------------------------------------
# Normalization


@dataclass(frozen=True)
class NormalizationParams:
    """Centroid/scale pair mapping a cloud to zero mean and unit RMS radius."""

    centroid: np.ndarray
    scale: float
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "centroid", as_point(self.centroid))
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise InvalidParameterError(f"scale must be positive, got {self.scale}")

    @staticmethod
    def identity() -> "NormalizationParams":
        return NormalizationParams(np.zeros(3), 1.0)

    def forward(self, points: np.ndarray) -> np.ndarray:
        return (points - self.centroid) / self.scale

    def inverse(self, points: np.ndarray) -> np.ndarray:
        return points * self.scale + self.centroid


def normalize(points) -> tuple[np.ndarray, NormalizationParams]:
    """Shift to zero centroid and scale to unit RMS radius.

    A degenerate set (all points identical) is only centered; scale stays 1
    and the returned params are flagged.
    """
    ps = as_point_set(points)
    centroid = ps.mean(axis=0)
    centered = ps - centroid
    rms = float(np.sqrt(np.einsum("ij,ij->", centered, centered) / ps.shape[0]))
    if rms < _DEGENERATE_SCALE:
        return centered, NormalizationParams(centroid, 1.0, degenerate=True)
    return centered / rms, NormalizationParams(centroid, rms)


def denormalize(points, params: NormalizationParams) -> np.ndarray:
    return params.inverse(as_point_set(points))


# ---------------------------------------------------------------------------
# Kernels and metrics


def gaussian_kernel_matrix(rows, cols, beta: float) -> np.ndarray:
    """Gaussian kernel matrix K[i, j] = exp(-||rows_i - cols_j||^2 / (2 beta^2))."""
    if not (beta > 0.0 and np.isfinite(beta)):
        raise InvalidParameterError(f"kernel width beta must be positive, got {beta}")
    return kernels.gaussian_kernel(as_point_set(rows), as_point_set(cols), float(beta))


def chamfer_distance(a, b) -> float:
    """Symmetric mean nearest-neighbor distance between two point sets."""
    return kernels.chamfer(as_point_set(a), as_point_set(b))


def farthest_point_sample(points, k: int, seed: int) -> np.ndarray:
    """Deterministic farthest-point subsample of size ``k``.

    The first point is drawn by a seeded RNG, the rest greedily maximize the
    minimum distance to the points already chosen.
    """
    ps = as_point_set(points)
    if not 1 <= k <= ps.shape[0]:
        raise InvalidParameterError(f"k must be in [1, {ps.shape[0]}], got {k}")
    start = int(np.random.default_rng(seed).integers(ps.shape[0]))
    return ps[kernels.fps_indices(ps, int(k), start)]


def farthest_point_indices(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Index variant of :func:`farthest_point_sample` for callers tracking rows."""
    ps = as_point_set(points)
    if not 1 <= k <= ps.shape[0]:
        raise InvalidParameterError(f"k must be in [1, {ps.shape[0]}], got {k}")
    start = int(np.random.default_rng(seed).integers(ps.shape[0]))
    return kernels.fps_indices(ps, int(k), start)


__all__ = [
    "Pose",
    "NormalizationParams",
    "as_point",
    "as_point_set",
    "quat_normalized",
    "quat_multiply",
    "quat_conjugate",
    "quat_rotate",
    "quat_from_axis_angle",
    "quat_angle_between",
    "pose_angular_distance",
    "normalize",
    "denormalize",
    "gaussian_kernel_matrix",
    "chamfer_distance",
    "farthest_point_sample",
    "farthest_point_indices",
]
