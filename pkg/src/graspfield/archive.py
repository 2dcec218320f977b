"""Shape-space archive: ASCII/JSON header plus raw little-endian matrices.

Layout:

    GRASPFIELD-SHAPESPACE 1\\n
    <one JSON line: dimensions, kernel width, normalization, digest>\\n
    canonical (M*3 float64) | mean_weights (M*3) | basis (q*3M) | singular_values (q)

The header is human-inspectable with ``head -2``; the matrices load with a
single ``frombuffer`` each. Writing is deterministic byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .geometry import NormalizationParams
from .shapespace import ShapeSpace

MAGIC = b"GRASPFIELD-SHAPESPACE 1\n"


def save_shape_space(space: ShapeSpace, path, build_digest: str = "") -> None:
    header = {
        "anchors": space.num_anchors,
        "latent": space.latent_dim,
        "kernel_width": space.kernel_width,
        "normalization": {
            "centroid": list(space.normalization.centroid),
            "scale": space.normalization.scale,
            "degenerate": space.normalization.degenerate,
        },
        "training_count": space.training_count,
        "build_digest": build_digest,
    }
    blob = bytearray()
    blob += MAGIC
    blob += json.dumps(header, sort_keys=True, separators=(",", ":")).encode("ascii")
    blob += b"\n"
    for arr in (space.canonical, space.mean_weights, space.basis, space.singular_values):
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_shape_space(path) -> ShapeSpace:
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise ParseError("not a shape-space archive (bad magic)", path=str(path), offset=0)
    header_end = data.find(b"\n", len(MAGIC))
    if header_end < 0:
        raise ParseError("missing archive header line", path=str(path), offset=len(MAGIC))
    try:
        header = json.loads(data[len(MAGIC) : header_end].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad archive header: {exc}", path=str(path), offset=len(MAGIC)) from exc

    from .serialization import take

    body = take(
        header,
        required={
            "anchors",
            "latent",
            "kernel_width",
            "normalization",
            "training_count",
            "build_digest",
        },
        context="archive header",
    )
    m = int(body["anchors"])
    q = int(body["latent"])
    norm_d = take(
        body["normalization"],
        required={"centroid", "scale", "degenerate"},
        context="archive normalization",
    )

    offset = header_end + 1
    sizes = [m * 3, m * 3, q * 3 * m, q]
    arrays = []
    for count in sizes:
        nbytes = count * 8
        if offset + nbytes > len(data):
            raise ParseError("truncated archive matrices", path=str(path), offset=offset)
        arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset))
        offset += nbytes
    if offset != len(data):
        raise ParseError(
            f"archive has {len(data) - offset} trailing bytes", path=str(path), offset=offset
        )

    canonical, mean_w, basis, svals = arrays
    return ShapeSpace(
        canonical=canonical.reshape(m, 3),
        mean_weights=mean_w.reshape(m, 3),
        basis=basis.reshape(q, 3 * m),
        singular_values=svals.copy(),
        kernel_width=float(body["kernel_width"]),
        normalization=NormalizationParams(
            np.asarray(norm_d["centroid"], dtype=np.float64),
            float(norm_d["scale"]),
            bool(norm_d["degenerate"]),
        ),
        training_count=int(body["training_count"]),
    )


def read_archive_digest(path) -> str:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ParseError("not a shape-space archive (bad magic)", path=str(path), offset=0)
    header_end = data.find(b"\n", len(MAGIC))
    header = json.loads(data[len(MAGIC) : header_end].decode("ascii"))
    return str(header.get("build_digest", ""))
