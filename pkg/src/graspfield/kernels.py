"""Kernel backend selection.

The compiled extension (``graspfield._native``) is preferred when it imported
successfully; otherwise the numpy fallback is used. Set the environment
variable ``GRASPFIELD_KERNELS`` to ``native`` or ``numpy`` to force a backend
(``native`` raises if the extension is unavailable). Both backends expose the
same functions and agree to floating-point roundoff; a comparison harness
lives in ``benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

try:
    from . import _native
except ImportError:
    _native = None


def _select():
    choice = os.environ.get("GRASPFIELD_KERNELS", "auto").lower()
    if choice == "numpy":
        return _kernels_numpy
    if choice == "native":
        if _native is None:
            raise ImportError(
                "GRASPFIELD_KERNELS=native but the compiled extension is not available"
            )
        return _native
    if choice != "auto":
        raise ValueError(f"unrecognized GRASPFIELD_KERNELS value: {choice!r}")
    return _native if _native is not None else _kernels_numpy


_impl = _select()

BACKEND = _impl.BACKEND_NAME

sqdist_matrix = _impl.sqdist_matrix
gaussian_kernel = _impl.gaussian_kernel
cpd_estep = _impl.cpd_estep
softmin_energy = _impl.softmin_energy
softmin_energy_grad = _impl.softmin_energy_grad
chamfer = _impl.chamfer
fps_indices = _impl.fps_indices


def available_backends():
    names = ["numpy"]
    if _native is not None:
        names.insert(0, "native")
    return names
