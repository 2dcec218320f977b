"""Mesh and point-cloud I/O, surface sampling, partial-view synthesis, and
the synthetic benchmark categories.

The synthetic families stand in for the mesh collections the original
experiments drew from: each family is a smooth parametric deformation of a
fixed canonical sampling pattern, so ground-truth correspondence and
parameters are available to the tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateViewError, InvalidParameterError, ParseError
from .geometry import as_point, as_point_set

SYNTHETIC_FAMILIES = ("ellipsoid_mugs", "stretched_hammers", "scaled_drill_blanks")

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", as_point_set(self.vertices))
        faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise InvalidParameterError(f"faces must be (F, 3), got {faces.shape}")
        if faces.min(initial=0) < 0 or faces.max(initial=-1) >= self.vertices.shape[0]:
            raise InvalidParameterError("face indices out of range")
        object.__setattr__(self, "faces", faces)

    def face_areas(self) -> np.ndarray:
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True)
class ViewSpec:
    viewpoint: np.ndarray
    mode: str = "halfspace"  # or "hidden_point_removal"
    hpr_radius_multiplier: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "viewpoint", as_point(self.viewpoint))
        if self.mode not in ("halfspace", "hidden_point_removal"):
            raise InvalidParameterError(f"unknown view mode {self.mode!r}")
        if not self.hpr_radius_multiplier > 1.0:
            raise InvalidParameterError("hpr_radius_multiplier must exceed 1")


# ---------------------------------------------------------------------------
# Loading and saving


def load_mesh(path) -> TriangleMesh:
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".obj":
        vertices, faces = _parse_obj(path)
    elif ext == ".ply":
        vertices, faces = _parse_ply(path, need_faces=True)
    else:
        raise InvalidParameterError(f"unsupported mesh extension {ext!r}")
    if np.isnan(vertices).any():
        raise ParseError("mesh contains NaN coordinates", path=str(path))
    mesh = TriangleMesh(vertices, faces)
    # Drop zero-area faces so downstream sampling never divides by zero.
    keep = mesh.face_areas() > 0.0
    if not keep.all():
        mesh = TriangleMesh(mesh.vertices, mesh.faces[keep])
    if mesh.faces.shape[0] == 0:
        raise ParseError("mesh has no non-degenerate faces", path=str(path))
    return mesh


def load_point_cloud(path) -> np.ndarray:
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".xyz":
        points = _parse_xyz(path)
    elif ext == ".ply":
        points, _ = _parse_ply(path, need_faces=False)
    else:
        raise InvalidParameterError(f"unsupported point-cloud extension {ext!r}")
    if np.isnan(points).any():
        raise ParseError("point cloud contains NaN coordinates", path=str(path))
    return as_point_set(points)


def save_point_cloud(points, path) -> None:
    ps = as_point_set(points)
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".xyz":
        lines = [f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n" for p in ps]
        path.write_text("".join(lines))
    elif ext == ".ply":
        header = (
            "ply\nformat ascii 1.0\n"
            f"element vertex {ps.shape[0]}\n"
            "property double x\nproperty double y\nproperty double z\n"
            "end_header\n"
        )
        body = [f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n" for p in ps]
        path.write_text(header + "".join(body))
    else:
        raise InvalidParameterError(f"unsupported point-cloud extension {ext!r}")


def _parse_xyz(path: Path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) != 3:
                raise ParseError(
                    f"expected 3 coordinates, got {len(tokens)}", path=str(path), line=lineno
                )
            try:
                rows.append([float(t) for t in tokens])
            except ValueError:
                raise ParseError("coordinate is not a number", path=str(path), line=lineno)
    if not rows:
        raise ParseError("file contains no points", path=str(path))
    return np.array(rows)


def _parse_obj(path: Path):
    vertices, faces = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "v":
                if len(tokens) < 4:
                    raise ParseError("vertex needs 3 coordinates", path=str(path), line=lineno)
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise ParseError("bad vertex coordinate", path=str(path), line=lineno)
            elif tokens[0] == "f":
                try:
                    idx = [int(t.split("/")[0]) for t in tokens[1:]]
                except ValueError:
                    raise ParseError("bad face index", path=str(path), line=lineno)
                if len(idx) < 3:
                    raise ParseError("face needs at least 3 vertices", path=str(path), line=lineno)
                if any(i == 0 for i in idx):
                    raise ParseError("OBJ indices are 1-based", path=str(path), line=lineno)
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                for second, third in zip(idx[1:], idx[2:]):
                    faces.append([idx[0], second, third])
    if not vertices:
        raise ParseError("OBJ has no vertices", path=str(path))
    return np.array(vertices), np.array(faces if faces else np.zeros((0, 3), dtype=np.int64))


_PLY_DTYPES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def _parse_ply(path: Path, need_faces: bool):
    with open(path, "rb") as fh:
        data = fh.read()

    # Header is ASCII regardless of body format.
    end_marker = b"end_header\n"
    end = data.find(end_marker)
    if not data.startswith(b"ply") or end < 0:
        raise ParseError("not a PLY file (missing header)", path=str(path), offset=0)
    header_lines = data[:end].decode("ascii", errors="replace").splitlines()
    body_offset = end + len(end_marker)

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype) or ("__list__", count_dtype, item_dtype, prop_name)])
    for line in header_lines[1:]:
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before element", path=str(path))
            if tokens[1] == "list":
                elements[-1][2].append(("__list__", tokens[2], tokens[3], tokens[4]))
            else:
                elements[-1][2].append((tokens[2], tokens[1]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"unsupported PLY format {fmt!r}", path=str(path))

    vertices = None
    faces = []
    if fmt == "ascii":
        tokens = data[body_offset:].decode("ascii", errors="replace").split()
        cursor = 0

        def next_token(context):
            nonlocal cursor
            if cursor >= len(tokens):
                raise ParseError(
                    f"truncated PLY while reading {context}",
                    path=str(path),
                    offset=len(data),
                )
            value = tokens[cursor]
            cursor += 1
            return value

        for name, count, props in elements:
            if name == "vertex":
                cols = {p[0]: i for i, p in enumerate(props) if p[0] != "__list__"}
                _require_xyz(cols, path)
                rows = np.empty((count, 3))
                for r in range(count):
                    values = [float(next_token("vertex")) for _ in props]
                    rows[r] = (values[cols["x"]], values[cols["y"]], values[cols["z"]])
                vertices = rows
            elif name == "face":
                for _ in range(count):
                    n = int(next_token("face"))
                    poly = [int(next_token("face")) for _ in range(n)]
                    for second, third in zip(poly[1:], poly[2:]):
                        faces.append([poly[0], second, third])
            else:
                for _ in range(count):
                    for p in props:
                        next_token(name)
                        if p[0] == "__list__":
                            raise ParseError(
                                f"list property in unsupported element {name!r}", path=str(path)
                            )
    else:
        offset = body_offset
        for name, count, props in elements:
            if name == "vertex":
                scalar = [(p[0], _PLY_DTYPES[p[1]]) for p in props]
                if any(p[0] == "__list__" for p in props):
                    raise ParseError("list property on vertices unsupported", path=str(path))
                cols = {pname: i for i, (pname, _) in enumerate(scalar)}
                _require_xyz(cols, path)
                fmt_str = "<" + "".join(code for _, (code, _) in scalar)
                stride = struct.calcsize(fmt_str)
                rows = np.empty((count, 3))
                for r in range(count):
                    if offset + stride > len(data):
                        raise ParseError("truncated PLY vertex data", path=str(path), offset=offset)
                    values = struct.unpack_from(fmt_str, data, offset)
                    offset += stride
                    rows[r] = (values[cols["x"]], values[cols["y"]], values[cols["z"]])
                vertices = rows
            elif name == "face":
                if len(props) != 1 or props[0][0] != "__list__":
                    raise ParseError("face element must be a single list property", path=str(path))
                _, count_t, item_t, _ = props[0]
                ccode, csize = _PLY_DTYPES[count_t]
                icode, isize = _PLY_DTYPES[item_t]
                for _ in range(count):
                    if offset + csize > len(data):
                        raise ParseError("truncated PLY face data", path=str(path), offset=offset)
                    (n,) = struct.unpack_from("<" + ccode, data, offset)
                    offset += csize
                    if offset + n * isize > len(data):
                        raise ParseError("truncated PLY face data", path=str(path), offset=offset)
                    poly = struct.unpack_from(f"<{n}{icode}", data, offset)
                    offset += n * isize
                    for second, third in zip(poly[1:], poly[2:]):
                        faces.append([poly[0], second, third])
            else:
                raise ParseError(f"unsupported binary element {name!r}", path=str(path))

    if vertices is None:
        raise ParseError("PLY has no vertex element", path=str(path))
    if need_faces and not faces:
        raise ParseError("PLY has no faces", path=str(path))
    faces_arr = np.array(faces, dtype=np.int64) if faces else np.zeros((0, 3), dtype=np.int64)
    return vertices, faces_arr


def _require_xyz(cols: dict, path: Path) -> None:
    if not {"x", "y", "z"} <= set(cols):
        raise ParseError("vertex element lacks x/y/z properties", path=str(path))


# ---------------------------------------------------------------------------
# Sampling and views


def sample_surface(mesh: TriangleMesh, k: int, seed: int) -> np.ndarray:
    """Area-weighted uniform surface samples, deterministic per seed."""
    if k < 1:
        raise InvalidParameterError(f"sample count must be positive, got {k}")
    areas = mesh.face_areas()
    total = areas.sum()
    if mesh.faces.shape[0] == 0 or total <= 0.0:
        raise InvalidParameterError("mesh has no area to sample")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(mesh.faces.shape[0], size=k, p=areas / total)
    u = rng.random(k)
    v = rng.random(k)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    tri = mesh.vertices[mesh.faces[chosen]]
    return (
        tri[:, 0]
        + u[:, None] * (tri[:, 1] - tri[:, 0])
        + v[:, None] * (tri[:, 2] - tri[:, 0])
    )


def synthesize_partial_view(points, view: ViewSpec) -> np.ndarray:
    """Cull points invisible from a viewpoint (half-space or spherical-flip HPR)."""
    ps = as_point_set(points)
    if view.mode == "halfspace":
        centroid = ps.mean(axis=0)
        direction = view.viewpoint - centroid
        norm = float(np.linalg.norm(direction))
        if norm < 1e-12:
            raise InvalidParameterError("viewpoint coincides with the centroid")
        keep = (ps - centroid) @ (direction / norm) >= 0.0
    else:
        rel = ps - view.viewpoint
        norms = np.linalg.norm(rel, axis=1)
        if np.any(norms < 1e-12):
            raise InvalidParameterError("a point coincides with the viewpoint")
        radius = view.hpr_radius_multiplier * norms.max()
        flipped = rel * (2.0 * radius / norms - 1.0)[:, None]
        cloud = np.vstack([flipped, np.zeros(3)])
        try:
            hull = ConvexHull(cloud)
        except QhullError as exc:
            raise DegenerateViewError(f"visibility hull failed: {exc}") from exc
        keep = np.zeros(ps.shape[0], dtype=bool)
        keep[hull.vertices[hull.vertices < ps.shape[0]]] = True
    if not keep.any():
        raise DegenerateViewError("partial view culled every point")
    return ps[keep]


# ---------------------------------------------------------------------------
# Synthetic categories


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count)
    z = 1.0 - 2.0 * (i + 0.5) / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * _GOLDEN_ANGLE
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _cylinder_pattern(count: int, length: float, radius: float) -> np.ndarray:
    """Deterministic low-discrepancy lateral-surface samples along +x."""
    i = np.arange(count)
    t = (i + 0.5) / count
    phi = i * _GOLDEN_ANGLE
    return np.column_stack([t * length, radius * np.cos(phi), radius * np.sin(phi)])


def _mug_instance(radial: float, height: float) -> np.ndarray:
    base = _fibonacci_sphere(400) * np.array([0.05, 0.05, 0.07])
    return base * np.array([radial, radial, height])


def _hammer_canonical_points() -> np.ndarray:
    handle = _cylinder_pattern(260, 0.24, 0.012)
    head_local = _cylinder_pattern(140, 0.11, 0.028)
    # Head axis runs along y, centered on the handle tip.
    head = np.column_stack(
        [head_local[:, 1] + 0.24, head_local[:, 0] - 0.055, head_local[:, 2]]
    )
    return np.vstack([handle, head])


def _hammer_instance(handle_stretch: float, thickness: float) -> np.ndarray:
    # Anisotropic scaling of the canonical sampling: stretching x lengthens
    # the handle (and carries the head with it), thickness scales the
    # cross-sections. Affine displacements keep the registration exact.
    return _hammer_canonical_points() * np.array([handle_stretch, thickness, thickness])


def _drill_canonical_points() -> np.ndarray:
    body = _cylinder_pattern(270, 0.20, 0.028) - np.array([0.06, 0.0, 0.0])
    grip_local = _cylinder_pattern(130, 0.12, 0.018)
    grip_axis = np.array([-0.25, 0.0, -1.0])
    grip_axis /= np.linalg.norm(grip_axis)
    side = np.array([grip_axis[2], 0.0, -grip_axis[0]])  # unit, orthogonal to axis
    grip = (
        grip_local[:, 0:1] * grip_axis
        + grip_local[:, 1:2] * side
        + grip_local[:, 2:3] * np.array([0.0, 1.0, 0.0])
    )
    return np.vstack([body, grip])


def _drill_instance(scale: float, grip_length: float) -> np.ndarray:
    # Uniform scale plus a smooth downward stretch that acts on the grip
    # (z below the body) and fades to nothing at body height.
    pts = _drill_canonical_points()
    z = pts[:, 2]
    profile = z * z / (z * z + 0.05**2)
    factor = 1.0 + (grip_length - 1.0) * np.where(z < 0.0, profile, 0.0)
    return np.column_stack([pts[:, 0], pts[:, 1], z * factor]) * scale


_FAMILY_BUILDERS = {
    "ellipsoid_mugs": (
        _mug_instance,
        (("radial_scale", 0.7, 1.3), ("height_scale", 0.7, 1.3)),
    ),
    "stretched_hammers": (
        _hammer_instance,
        (("handle_stretch", 0.8, 1.2), ("thickness", 0.85, 1.15)),
    ),
    "scaled_drill_blanks": (
        _drill_instance,
        (("uniform_scale", 0.75, 1.25), ("grip_length", 0.85, 1.15)),
    ),
}


def generate_synthetic_category(family: str, n: int, seed: int):
    """Deterministic benchmark category with known generative parameters.

    Returns ``(canonical, instances, ground_truth_params)``. The canonical
    cloud is the parameter-midpoint instance and does not depend on ``seed``
    or ``n``; instances share its sampling pattern, so row i of an instance
    corresponds to row i of the canonical cloud.
    """
    if family not in _FAMILY_BUILDERS:
        raise InvalidParameterError(
            f"unknown family {family!r}, expected one of {SYNTHETIC_FAMILIES}"
        )
    if n < 2:
        raise InvalidParameterError(f"need at least 2 instances, got {n}")
    build, param_spec = _FAMILY_BUILDERS[family]
    canonical = build(*[0.5 * (lo + hi) for _, lo, hi in param_spec])
    rng = np.random.default_rng(seed)
    instances, params = [], []
    for _ in range(n):
        values = {name: float(rng.uniform(lo, hi)) for name, lo, hi in param_spec}
        instances.append(build(*values.values()))
        params.append(values)
    return canonical, instances, params


def canonical_instance(family: str) -> np.ndarray:
    """The seed-independent canonical cloud of a synthetic family."""
    build, param_spec = _FAMILY_BUILDERS[family] if family in _FAMILY_BUILDERS else (None, None)
    if build is None:
        raise InvalidParameterError(
            f"unknown family {family!r}, expected one of {SYNTHETIC_FAMILIES}"
        )
    return build(*[0.5 * (lo + hi) for _, lo, hi in param_spec])
