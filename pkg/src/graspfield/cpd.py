"""Non-rigid coherent point drift.

Estimates a smooth displacement field mapping a source cloud onto a target
cloud. The source points act as GMM centroids drifting toward the target
under a motion-coherence prior: the field is ``v(z) = G(z, Y) @ W`` where G
is a Gaussian kernel against the source anchors and W is the estimated
weight matrix. Because v is defined for arbitrary query points, the fitted
field can later carry grasp keypoints along with the shape.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels
from .errors import InvalidParameterError, NumericFailureError
from .geometry import (
    NormalizationParams,
    as_point_set,
    farthest_point_indices,
    gaussian_kernel_matrix,
    normalize,
)

log = logging.getLogger(__name__)

# Clouds above this size are thinned by farthest-point sampling before EM;
# keeps the dense M-step solve within the interactive fit budget.
MAX_REGISTRATION_POINTS = 1024

# Cooling is released once the raw EM variance falls this far below the
# annealed one; correspondences cannot change meaningfully past that point.
_ANNEAL_RELEASE = 0.02


@dataclass(frozen=True)
class CpdConfig:
    """EM parameters. Kernel width and tolerances live in the normalized frame.

    ``regularization_floor`` keeps the M-step Tikhonov term from vanishing
    when sigma^2 collapses on clean data; without it the solve degenerates
    to unregularized kernel interpolation and the weights pick up large
    oscillations that are invisible in the field but poison downstream PCA.
    """

    beta: float = 1.0
    lam: float = 2.0
    outlier_weight: float = 0.1
    max_iterations: int = 300
    sigma2_tolerance: float = 1e-6
    seed: int = 0
    regularization_floor: float = 1e-6
    annealing_rate: float = 0.93

    def __post_init__(self):
        if not self.beta > 0.0:
            raise InvalidParameterError(f"beta must be positive, got {self.beta}")
        if self.lam < 0.0:
            raise InvalidParameterError(f"lambda must be nonnegative, got {self.lam}")
        if not 0.0 <= self.outlier_weight < 1.0:
            raise InvalidParameterError(
                f"outlier weight must be in [0, 1), got {self.outlier_weight}"
            )
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be at least 1")
        if not self.sigma2_tolerance > 0.0:
            raise InvalidParameterError("sigma2_tolerance must be positive")
        if self.regularization_floor < 0.0:
            raise InvalidParameterError("regularization_floor must be nonnegative")
        if not 0.0 < self.annealing_rate < 1.0:
            raise InvalidParameterError("annealing_rate must be in (0, 1)")


@dataclass(frozen=True)
class DeformationField:
    """Smooth displacement field anchored at the source points.

    ``anchors`` are stored in the world frame; ``weights`` were estimated in
    the normalized frame recorded by ``normalization``, and queries are
    mapped through that frame, so the field is valid for any world-frame
    point set.
    """

    anchors: np.ndarray
    weights: np.ndarray
    kernel_width: float
    normalization: NormalizationParams = field(default_factory=NormalizationParams.identity)

    def __post_init__(self):
        object.__setattr__(self, "anchors", as_point_set(self.anchors))
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.shape != (self.anchors.shape[0], 3):
            raise InvalidParameterError(
                f"weights shape {w.shape} does not match {self.anchors.shape[0]} anchors"
            )
        if not np.all(np.isfinite(w)):
            raise InvalidParameterError("weights contain non-finite values")
        if not self.kernel_width > 0.0:
            raise InvalidParameterError("kernel width must be positive")
        object.__setattr__(self, "weights", w)


def apply_deformation(field: DeformationField, points) -> np.ndarray:
    """Evaluate ``z + v(z)`` for an arbitrary world-frame query set."""
    z = as_point_set(points)
    zn = field.normalization.forward(z)
    anchors_n = field.normalization.forward(field.anchors)
    vn = gaussian_kernel_matrix(zn, anchors_n, field.kernel_width) @ field.weights
    return field.normalization.inverse(zn + vn)


def _maybe_subsample(points: np.ndarray, seed: int) -> np.ndarray:
    if points.shape[0] <= MAX_REGISTRATION_POINTS:
        return points
    idx = farthest_point_indices(points, MAX_REGISTRATION_POINTS, seed)
    return points[np.sort(idx)]


def register_nonrigid(
    source, target, config: CpdConfig = CpdConfig()
) -> tuple[DeformationField, float, int]:
    """Fit a deformation field mapping ``source`` onto ``target`` by EM.

    Both clouds are normalized with the source's centroid and scale so the
    estimated weights live in a single frame shared by later keypoint
    queries. Returns the field, the final GMM variance (normalized units)
    and the number of EM iterations run.
    """
    src = _maybe_subsample(as_point_set(source), config.seed)
    tgt = _maybe_subsample(as_point_set(target), config.seed)

    src_n, params = normalize(src)
    tgt_n = params.forward(tgt)

    m, n = src_n.shape[0], tgt_n.shape[0]
    gram = kernels.gaussian_kernel(src_n, src_n, config.beta)
    weights = np.zeros((m, 3))
    moved = src_n.copy()

    # Scale-aware init: mean squared source/target pairwise distance over 3.
    sigma2 = float(
        (np.einsum("ij,ij->", src_n, src_n) * n
         + np.einsum("ij,ij->", tgt_n, tgt_n) * m
         - 2.0 * float(src_n.sum(axis=0) @ tgt_n.sum(axis=0)))
        / (3.0 * m * n)
    )
    sigma2 = max(sigma2, 1e-12)

    w_out = config.outlier_weight
    iterations = 0
    for iteration in range(1, config.max_iterations + 1):
        iterations = iteration
        uniform_c = (2.0 * np.pi * sigma2) ** 1.5 * (w_out / (1.0 - w_out)) * m / n
        p1, pt1, px = kernels.cpd_estep(moved, tgt_n, sigma2, uniform_c)

        # M-step in symmetric form: (G + r diag(1/p1)) W = diag(1/p1) rhs is
        # SPD, so a Cholesky solve does the work of half an LU.
        reg = config.lam * max(sigma2, config.regularization_floor)
        p1c = np.maximum(p1, 1e-12)
        lhs = gram + np.diag(reg / p1c)
        rhs = px / p1c[:, None] - src_n
        try:
            weights = cho_solve(cho_factor(lhs, lower=True, check_finite=False), rhs,
                                check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericFailureError(f"M-step solve failed at iteration {iteration}: {exc}")

        moved = src_n + gram @ weights
        np_total = float(p1.sum())
        if np_total <= 0.0:
            raise NumericFailureError(
                f"all responsibilities vanished at iteration {iteration}"
            )
        raw_sigma2 = (
            float(pt1 @ np.einsum("ij,ij->i", tgt_n, tgt_n))
            - 2.0 * float(np.einsum("ij,ij->", px, moved))
            + float(p1 @ np.einsum("ij,ij->i", moved, moved))
        ) / (3.0 * np_total)
        raw_sigma2 = max(raw_sigma2, 1e-12)

        if not (np.isfinite(raw_sigma2) and np.all(np.isfinite(weights))):
            raise NumericFailureError(f"EM produced non-finite values at iteration {iteration}")

        # Deterministic annealing: cap how fast the variance may shrink so
        # correspondences settle globally before they lock in. Once the raw
        # residual detaches from the annealed variance the fit is resolved
        # and cooling is released.
        if raw_sigma2 < _ANNEAL_RELEASE * sigma2:
            new_sigma2 = raw_sigma2
        else:
            new_sigma2 = max(raw_sigma2, config.annealing_rate * sigma2)

        delta = abs(sigma2 - new_sigma2)
        sigma2 = new_sigma2
        if delta < config.sigma2_tolerance:
            break

    log.debug("cpd converged: sigma2=%.3e iterations=%d", sigma2, iterations)
    field_out = DeformationField(src, weights, config.beta, params)
    return field_out, sigma2, iterations
