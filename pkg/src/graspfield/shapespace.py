"""Latent deformation-field manifold of an object category.

Each training instance is registered against the canonical cloud; the
flattened kernel-weight matrices form a design matrix whose principal
components span the characteristic deformations of the category. Fitting a
new observation then means descending a soft-correspondence energy in the
low-dimensional latent space, which keeps the deformation on-manifold even
when the observation is partial.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .cpd import CpdConfig, DeformationField, register_nonrigid
from .errors import InvalidParameterError, NumericFailureError
from .geometry import NormalizationParams, as_point_set, farthest_point_sample

log = logging.getLogger(__name__)

DEFAULT_SIGMA_SCHEDULE = (0.1, 0.05, 0.025)

# Observations above this size are thinned before fitting; the energy is
# O(M * N) per descent step.
MAX_FIT_POINTS = 2048
_SUBSAMPLE_SEED = 0


@dataclass(frozen=True)
class ShapeSpace:
    """PCA basis over flattened deformation weights of a category.

    ``basis`` rows are orthonormal principal axes in R^(3M); ``mean_weights``
    is the design-matrix mean reshaped to (M, 3). ``canonical`` and the
    normalization frame are shared with every decoded field.
    """

    canonical: np.ndarray
    mean_weights: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    kernel_width: float
    normalization: NormalizationParams
    training_count: int

    def __post_init__(self):
        object.__setattr__(self, "canonical", as_point_set(self.canonical))
        m = self.canonical.shape[0]
        mean_w = np.ascontiguousarray(self.mean_weights, dtype=np.float64)
        basis = np.ascontiguousarray(self.basis, dtype=np.float64)
        svals = np.ascontiguousarray(self.singular_values, dtype=np.float64)
        if mean_w.shape != (m, 3):
            raise InvalidParameterError(f"mean_weights shape {mean_w.shape} != ({m}, 3)")
        if basis.ndim != 2 or basis.shape[1] != 3 * m:
            raise InvalidParameterError(f"basis shape {basis.shape} incompatible with 3M={3 * m}")
        q = basis.shape[0]
        if not 1 <= q <= max(1, self.training_count - 1):
            raise InvalidParameterError(
                f"latent dimension {q} outside [1, {self.training_count - 1}]"
            )
        if svals.shape != (q,):
            raise InvalidParameterError("one singular value per basis row required")
        if np.any(np.diff(svals) > 0.0):
            raise InvalidParameterError("singular values must be non-increasing")
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(q), atol=1e-9):
            raise InvalidParameterError("basis rows are not orthonormal")
        if not self.kernel_width > 0.0:
            raise InvalidParameterError("kernel width must be positive")
        object.__setattr__(self, "mean_weights", mean_w)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "singular_values", svals)

    @property
    def latent_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def num_anchors(self) -> int:
        return self.canonical.shape[0]

    @cached_property
    def _canonical_normalized(self) -> np.ndarray:
        return self.normalization.forward(self.canonical)

    @cached_property
    def _anchor_gram(self) -> np.ndarray:
        cn = self._canonical_normalized
        return kernels.gaussian_kernel(cn, cn, self.kernel_width)


@dataclass(frozen=True)
class FitConfig:
    """Coarse-to-fine descent settings; sigmas are in normalized units."""

    sigma_schedule: tuple = DEFAULT_SIGMA_SCHEDULE
    step_size: float = 1.0
    max_steps_per_stage: int = 100
    gradient_tolerance: float = 1e-6
    init: np.ndarray | None = None
    bound_multiplier: float = 3.0

    def __post_init__(self):
        sched = tuple(float(s) for s in self.sigma_schedule)
        if len(sched) == 0:
            raise InvalidParameterError("sigma schedule must be nonempty")
        if any(s <= 0.0 for s in sched):
            raise InvalidParameterError("sigma values must be positive")
        if any(later >= earlier for earlier, later in zip(sched, sched[1:])):
            raise InvalidParameterError("sigma schedule must be strictly decreasing")
        if not self.step_size > 0.0:
            raise InvalidParameterError("step size must be positive")
        if self.max_steps_per_stage < 1:
            raise InvalidParameterError("max_steps_per_stage must be at least 1")
        if not self.bound_multiplier > 0.0:
            raise InvalidParameterError("bound multiplier must be positive")
        object.__setattr__(self, "sigma_schedule", sched)


def _as_code(space: ShapeSpace, values) -> np.ndarray:
    code = np.asarray(values, dtype=np.float64).reshape(-1)
    if code.shape != (space.latent_dim,):
        raise InvalidParameterError(
            f"latent code has dimension {code.shape[0]}, space expects {space.latent_dim}"
        )
    if not np.all(np.isfinite(code)):
        raise InvalidParameterError("latent code has non-finite entries")
    return code


def build_shape_space(
    canonical,
    training,
    cpd_config: CpdConfig = CpdConfig(),
    variance_target: float = 0.95,
    report: dict | None = None,
) -> ShapeSpace:
    """Register the canonical cloud onto each training instance and PCA the
    flattened weight matrices.

    Keeps the smallest number of components whose cumulative explained
    variance reaches ``variance_target`` (always at least one, at most
    ``n - 1``). If ``report`` is a dict it is filled with per-instance
    registration stats and the full spectrum, for diagnostics.
    """
    training = list(training)
    n = len(training)
    if n < 2:
        raise InvalidParameterError(f"need >= 2 training instances, got {n}")
    if not 0.0 < variance_target <= 1.0:
        raise InvalidParameterError(f"variance target must be in (0, 1], got {variance_target}")

    anchors = None
    params = None
    rows = []
    registrations = []
    for index, instance in enumerate(training):
        try:
            field, sigma2, iters = register_nonrigid(canonical, instance, cpd_config)
        except (NumericFailureError, InvalidParameterError) as exc:
            raise type(exc)(f"registration of training instance {index} failed: {exc}") from exc
        log.info("registered instance %d: sigma2=%.3e iterations=%d", index, sigma2, iters)
        registrations.append({"instance": index, "sigma2": sigma2, "iterations": iters})
        if anchors is None:
            anchors = field.anchors
            params = field.normalization
        rows.append(field.weights.reshape(-1))

    design = np.vstack(rows)
    mean_flat = design.mean(axis=0)
    centered = design - mean_flat

    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    total = float((svals**2).sum())
    if total <= 1e-24:
        q = 1
    else:
        ratios = np.cumsum(svals**2) / total
        q = int(np.searchsorted(ratios, variance_target - 1e-12) + 1)
    q = max(1, min(q, n - 1))

    if report is not None:
        report["registrations"] = registrations
        report["singular_values"] = [float(s) for s in svals]
        report["explained_variance"] = (
            [float(r) for r in np.cumsum(svals**2) / total] if total > 1e-24 else None
        )
        report["kept_components"] = q

    return ShapeSpace(
        canonical=anchors,
        mean_weights=mean_flat.reshape(-1, 3),
        basis=vt[:q],
        singular_values=svals[:q],
        kernel_width=cpd_config.beta,
        normalization=params,
        training_count=n,
    )


def decode(space: ShapeSpace, code) -> DeformationField:
    """Latent code to deformation field: W(l) = W_mean + unflatten(l @ basis)."""
    code = _as_code(space, code)
    weights = space.mean_weights + (code @ space.basis).reshape(-1, 3)
    return DeformationField(
        anchors=space.canonical,
        weights=weights,
        kernel_width=space.kernel_width,
        normalization=space.normalization,
    )


def _deformed_canonical(space: ShapeSpace, code: np.ndarray) -> np.ndarray:
    weights = space.mean_weights + (code @ space.basis).reshape(-1, 3)
    return space._canonical_normalized + space._anchor_gram @ weights


def _check_sigma(sigma: float) -> float:
    if not (sigma > 0.0 and np.isfinite(sigma)):
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    return float(sigma)


def energy(space: ShapeSpace, code, observation, sigma: float) -> float:
    """Soft-correspondence energy of the decoded model against an observation.

    ``E = -sum_m log sum_n exp(-||O_n - T(C_m)||^2 / (2 sigma^2))`` with the
    outer sum over canonical points and the inner over observed points; the
    observation is a world-frame cloud and is mapped into the space's
    normalized frame, where ``sigma`` is expressed.
    """
    sigma = _check_sigma(sigma)
    code = _as_code(space, code)
    obs_n = space.normalization.forward(as_point_set(observation))
    return kernels.softmin_energy(_deformed_canonical(space, code), obs_n, sigma)


def energy_gradient(space: ShapeSpace, code, observation, sigma: float) -> np.ndarray:
    """Analytic gradient of :func:`energy` with respect to the latent code."""
    sigma = _check_sigma(sigma)
    code = _as_code(space, code)
    obs_n = space.normalization.forward(as_point_set(observation))
    _, grad = _energy_and_gradient(space, code, obs_n, sigma)
    return grad


def _energy_and_gradient(space, code, obs_n, sigma):
    tc = _deformed_canonical(space, code)
    e, point_grad = kernels.softmin_energy_grad(tc, obs_n, sigma)
    # Chain rule: dE/dW = G^T dE/dT (G symmetric), then through the linear
    # decoder x(l) = x_mean + basis^T l.
    return e, space.basis @ (space._anchor_gram @ point_grad).reshape(-1)


def fit_latent(
    space: ShapeSpace, observation, config: FitConfig = FitConfig()
) -> tuple[np.ndarray, float, list]:
    """Fit latent coordinates to a (possibly partial) observed cloud.

    Runs backtracking gradient descent at each sigma of the schedule, from
    coarse to fine. The descent works in singular-value-scaled coordinates
    (components of very different variance move at comparable rates) and
    steps along the normalized gradient with adaptive length. Latent
    components are clamped to ``bound_multiplier * singular_value`` boxes so
    the fit cannot leave the deformations seen in training. Returns the
    code, final energy and the per-stage sequences of accepted energies.
    """
    obs = as_point_set(observation)
    if obs.shape[0] > MAX_FIT_POINTS:
        obs = farthest_point_sample(obs, MAX_FIT_POINTS, _SUBSAMPLE_SEED)
    obs_n = space.normalization.forward(obs)

    # Components with vanishing variance are pinned at zero by a zero-width
    # clamp; their unit scale only avoids a division by zero.
    live = space.singular_values > 1e-12
    scales = np.where(live, space.singular_values, 1.0)
    u_bound = np.where(live, config.bound_multiplier, 0.0)

    if config.init is None:
        u = np.zeros(space.latent_dim)
    else:
        u = np.clip(_as_code(space, config.init) / scales, -u_bound, u_bound)

    def eval_full(u_vec):
        e, grad_code = _energy_and_gradient(space, u_vec * scales, obs_n, sigma)
        return e, grad_code * scales

    trace = []
    current = None
    for stage, sigma in enumerate(config.sigma_schedule):
        current, grad = eval_full(u)
        if not np.isfinite(current):
            raise NumericFailureError(f"energy diverged at stage {stage} (sigma={sigma})")
        stage_energies = [current]
        alpha = config.step_size
        for _ in range(config.max_steps_per_stage):
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= config.gradient_tolerance:
                break
            direction = grad / gnorm
            accepted = False
            while alpha > 1e-12 * config.step_size:
                candidate = np.clip(u - alpha * direction, -u_bound, u_bound)
                cand_energy = kernels.softmin_energy(
                    _deformed_canonical(space, candidate * scales), obs_n, sigma
                )
                if np.isnan(cand_energy):
                    raise NumericFailureError(f"energy diverged at stage {stage} (sigma={sigma})")
                if cand_energy < current:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            u = candidate
            current, grad = eval_full(u)
            stage_energies.append(current)
            alpha = min(alpha * 1.5, config.step_size)
        trace.append(stage_energies)

    return u * scales, float(current), trace
