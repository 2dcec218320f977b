"""Numpy implementations of the hot numerical kernels.

This is the fallback backend; ``graspfield._native`` provides compiled
equivalents with identical signatures. All inputs are float64 C-contiguous
arrays of shape (N, 3) unless stated otherwise; callers are responsible for
validation.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

# Row-block size used to bound temporary pairwise matrices to a few MB.
_CHUNK = 2048


def sqdist_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(a), len(b))."""
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def gaussian_kernel(a: np.ndarray, b: np.ndarray, beta: float) -> np.ndarray:
    """exp(-||a_i - b_j||^2 / (2 beta^2)), shape (len(a), len(b))."""
    k = sqdist_matrix(a, b)
    k *= -1.0 / (2.0 * beta * beta)
    np.exp(k, out=k)
    return k


def cpd_estep(t: np.ndarray, x: np.ndarray, sigma2: float, uniform_c: float):
    """One CPD E-step.

    ``t`` are the current GMM centroids (M, 3), ``x`` the data points (N, 3),
    ``uniform_c`` the precomputed constant of the uniform outlier component
    added to every denominator.

    Returns ``(p1, pt1, px)``: row sums (M,), column sums (N,) and the
    matrix-vector products P @ x (M, 3) of the responsibility matrix P.
    """
    m = t.shape[0]
    n = x.shape[0]
    p1 = np.zeros(m)
    pt1 = np.empty(n)
    px = np.zeros((m, 3))
    inv = -1.0 / (2.0 * sigma2)
    tt = np.einsum("ij,ij->i", t, t)
    for start in range(0, n, _CHUNK):
        xs = x[start : start + _CHUNK]
        d2 = tt[:, None] - 2.0 * (t @ xs.T)
        d2 += np.einsum("ij,ij->i", xs, xs)[None, :]
        np.maximum(d2, 0.0, out=d2)
        k = np.exp(d2 * inv)
        ksum = k.sum(axis=0)
        # den == 0 can only happen with no outlier component and full
        # underflow; such points carry zero responsibility everywhere.
        den = ksum + uniform_c
        safe = np.where(den > 0.0, den, 1.0)
        k /= safe[None, :]
        p1 += k.sum(axis=1)
        pt1[start : start + xs.shape[0]] = ksum / safe
        px += k @ xs
    return p1, pt1, px


def _softmin_rows(tc: np.ndarray, obs: np.ndarray, sigma: float):
    """Stabilized per-row log-sum-exp and row softmax @ obs."""
    inv = -1.0 / (2.0 * sigma * sigma)
    a = sqdist_matrix(tc, obs)
    a *= inv
    amax = a.max(axis=1)
    np.exp(a - amax[:, None], out=a)
    s = a.sum(axis=1)
    return amax, s, a


def softmin_energy(tc: np.ndarray, obs: np.ndarray, sigma: float) -> float:
    """-sum_m log sum_n exp(-||obs_n - tc_m||^2 / (2 sigma^2))."""
    amax, s, _ = _softmin_rows(tc, obs, sigma)
    return float(-(amax + np.log(s)).sum())


def softmin_energy_grad(tc: np.ndarray, obs: np.ndarray, sigma: float):
    """Energy plus its gradient with respect to the model points tc (M, 3)."""
    amax, s, p = _softmin_rows(tc, obs, sigma)
    energy = float(-(amax + np.log(s)).sum())
    p /= s[:, None]
    grad = (tc - p @ obs) / (sigma * sigma)
    return energy, grad


def chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean nearest-neighbor distance."""
    min_ab = np.empty(a.shape[0])
    min_ba = np.full(b.shape[0], np.inf)
    for start in range(0, a.shape[0], _CHUNK):
        d2 = sqdist_matrix(a[start : start + _CHUNK], b)
        min_ab[start : start + d2.shape[0]] = d2.min(axis=1)
        np.minimum(min_ba, d2.min(axis=0), out=min_ba)
    return float(0.5 * (np.sqrt(min_ab).mean() + np.sqrt(min_ba).mean()))


def fps_indices(points: np.ndarray, k: int, start: int) -> np.ndarray:
    """Farthest-point sampling indices; greedy max-min from ``start``."""
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = start
    d2 = np.einsum("ij,ij->i", points - points[start], points - points[start])
    for i in range(1, k):
        nxt = int(np.argmax(d2))
        chosen[i] = nxt
        diff = points - points[nxt]
        np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
    return chosen
