"""Point-cloud value types, file I/O, resampling, and rigid transforms.

Coordinates live in canonical-frame object units (object diameter is
roughly 1). All types are immutable after construction and every
operation is pure given its seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyCloud, InvalidPose, IoFailure, MalformedFile
from .rng import make_rng

_ORTHO_TOL = 1e-9


class PointCloud:
    """Immutable ordered collection of 3D points, shape (n, 3) float64.

    May be empty (octant regions can be); operations that need points,
    losses and metrics in particular, raise EmptyCloud themselves.
    """

    __slots__ = ("points",)

    def __init__(self, points) -> None:
        pts = np.array(points, dtype=np.float64, copy=True)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected (n, 3) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __setattr__(self, name, value):
        raise AttributeError("PointCloud is immutable")

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"PointCloud({len(self)} points)"

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(min, max) corners of the axis-aligned bounding box."""
        if len(self) == 0:
            raise EmptyCloud("bounds of an empty cloud")
        return self.points.min(axis=0), self.points.max(axis=0)


@dataclass(frozen=True)
class RigidPose:
    """Rotation (3x3, orthonormal, det +1) plus translation (3,)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=np.float64, copy=True)
        trans = np.array(self.translation, dtype=np.float64, copy=True)
        if rot.shape != (3, 3) or trans.shape != (3,):
            raise InvalidPose(f"bad shapes {rot.shape}, {trans.shape}")
        if not np.all(np.isfinite(rot)) or not np.all(np.isfinite(trans)):
            raise InvalidPose("non-finite pose")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > _ORTHO_TOL:
            raise InvalidPose("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise InvalidPose("rotation determinant is not +1")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @staticmethod
    def identity() -> "RigidPose":
        return RigidPose(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidPose":
        rt = self.rotation.T
        return RigidPose(rt, -rt @ self.translation)


@dataclass(frozen=True)
class NoiseSpec:
    """Bounds for uniform pose noise; translation in object-diameter units."""

    max_rotation_deg: float = 0.0
    max_translation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.max_rotation_deg < 0 or self.max_translation < 0:
            raise ValueError("noise bounds must be >= 0")


def compose(outer: RigidPose, inner: RigidPose) -> RigidPose:
    """Pose equivalent to applying `inner` first, then `outer`."""
    return RigidPose(
        outer.rotation @ inner.rotation,
        outer.rotation @ inner.translation + outer.translation,
    )


def apply_pose(cloud: PointCloud, pose: RigidPose) -> PointCloud:
    """Map every point p to rotation @ p + translation, order preserved."""
    if not isinstance(pose, RigidPose):
        raise InvalidPose(f"not a RigidPose: {pose!r}")
    return PointCloud(cloud.points @ pose.rotation.T + pose.translation)


def resample(cloud: PointCloud, n: int, seed: int) -> PointCloud:
    """Return exactly n points drawn from the cloud, deterministic per seed.

    n <= |cloud|: a uniform sample without replacement (random order).
    n > |cloud|: every original point (in order) plus uniform
    with-replacement fill.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot resample an empty cloud")
    if n <= 0:
        raise ValueError("n must be positive")
    rng = make_rng(seed, 0x5E5A)
    m = len(cloud)
    if n <= m:
        idx = rng.choice(m, size=n, replace=False)
    else:
        idx = np.concatenate([np.arange(m), rng.integers(0, m, size=n - m)])
    return PointCloud(cloud.points[idx])


def _rotation_from_axis_angle(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle_rad) * k + (1.0 - np.cos(angle_rad)) * (k @ k)


def _unit_vector(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.standard_normal(3)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def sample_pose_noise(spec: NoiseSpec) -> RigidPose:
    """Uniform pose noise: axis and direction uniform on the sphere,
    rotation angle uniform in [0, max_rotation_deg], translation norm
    uniform in [0, max_translation]."""
    rng = make_rng(spec.seed, 0x0A15)
    axis = _unit_vector(rng)
    angle = np.deg2rad(rng.uniform(0.0, spec.max_rotation_deg))
    direction = _unit_vector(rng)
    magnitude = rng.uniform(0.0, spec.max_translation)
    return RigidPose(_rotation_from_axis_angle(axis, angle), magnitude * direction)


# ---------------------------------------------------------------------------
# File formats: ASCII XYZ and PLY (ascii / binary little-endian).

_PLY_TYPES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def load_cloud(path, format: str | None = None) -> PointCloud:
    """Load a cloud from an ASCII XYZ or PLY file.

    format defaults to the file suffix; XYZ lines hold one `x y z`
    triple, `#` comment lines are skipped. PLY may be ascii or
    binary-little-endian; only the vertex element is read.
    """
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if fmt == "xyz":
        return _parse_xyz(raw, path)
    if fmt == "ply":
        return _parse_ply(raw, path)
    raise MalformedFile(f"unknown format {fmt!r} for {path}")


def _parse_xyz(raw: bytes, path: Path) -> PointCloud:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFile(f"{path}: not valid text") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 3:
            raise MalformedFile(f"{path}:{lineno}: expected 3 values, got {len(parts)}")
        try:
            triple = [float(p) for p in parts]
        except ValueError as exc:
            raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
        if not all(np.isfinite(triple)):
            raise MalformedFile(f"{path}:{lineno}: non-finite coordinate")
        rows.append(triple)
    if not rows:
        raise EmptyCloud(f"{path}: no points")
    return PointCloud(np.array(rows))


def _parse_ply(raw: bytes, path: Path) -> PointCloud:
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise MalformedFile(f"{path}: not a PLY file")
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len(b"end_header\n"):]

    fmt = None
    elements = []  # (name, count, [(prop_name, type_code, size)])
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1] not in ("ascii", "binary_little_endian"):
                raise MalformedFile(f"{path}: unsupported PLY format {parts[1]}")
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MalformedFile(f"{path}: property before element")
            if parts[1] == "list":
                raise MalformedFile(f"{path}: list properties are not supported")
            if parts[1] not in _PLY_TYPES:
                raise MalformedFile(f"{path}: unknown property type {parts[1]}")
            code, size = _PLY_TYPES[parts[1]]
            elements[-1][2].append((parts[2], code, size))
    if fmt is None:
        raise MalformedFile(f"{path}: missing format line")

    pts = None
    if fmt == "ascii":
        lines = body.decode("ascii", errors="replace").splitlines()
        cursor = 0
        for name, count, props in elements:
            if name != "vertex":
                cursor += count
                continue
            if len(lines) < cursor + count:
                raise MalformedFile(f"{path}: truncated vertex rows")
            pts = _vertex_rows_ascii(lines[cursor:cursor + count], props, path)
            break
    else:
        offset = 0
        for name, count, props in elements:
            stride = sum(size for _, _, size in props)
            if name != "vertex":
                offset += count * stride
                continue
            pts = _vertex_rows_binary(body, offset, count, props, path)
            break
    if pts is None:
        raise MalformedFile(f"{path}: no vertex element")
    if pts.shape[0] == 0:
        raise EmptyCloud(f"{path}: zero vertices")
    if not np.all(np.isfinite(pts)):
        raise MalformedFile(f"{path}: non-finite vertex coordinate")
    return PointCloud(pts)


def _xyz_columns(props, path: Path) -> tuple[int, int, int]:
    names = [p[0] for p in props]
    try:
        return names.index("x"), names.index("y"), names.index("z")
    except ValueError as exc:
        raise MalformedFile(f"{path}: vertex element lacks x/y/z") from exc


def _vertex_rows_ascii(lines, props, path: Path) -> np.ndarray:
    ix, iy, iz = _xyz_columns(props, path)
    out = np.empty((len(lines), 3))
    for row, line in enumerate(lines):
        parts = line.split()
        if len(parts) < len(props):
            raise MalformedFile(f"{path}: truncated vertex row {row}")
        try:
            out[row] = (float(parts[ix]), float(parts[iy]), float(parts[iz]))
        except ValueError as exc:
            raise MalformedFile(f"{path}: bad vertex row {row}: {exc}") from exc
    return out


def _vertex_rows_binary(body: bytes, offset: int, count: int, props, path: Path) -> np.ndarray:
    ix, iy, iz = _xyz_columns(props, path)
    stride = sum(size for _, _, size in props)
    if len(body) < offset + count * stride:
        raise MalformedFile(f"{path}: truncated binary body")
    fields = struct.Struct("<" + "".join(code for _, code, _ in props))
    out = np.empty((count, 3))
    for row in range(count):
        values = fields.unpack_from(body, offset + row * stride)
        out[row] = (values[ix], values[iy], values[iz])
    return out


def save_cloud(cloud: PointCloud, path, format: str | None = None, digits: int = 9) -> None:
    """Write a cloud as ASCII XYZ, ASCII PLY, or binary PLY.

    ASCII uses `digits` significant digits (round trip within 1e-6 at the
    default); binary PLY stores float64 and round-trips bitwise. Choose
    binary by passing format="ply" with a `.ply` path (the default for
    .ply) or format="ply-ascii" for a text PLY.
    """
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    pts = cloud.points
    try:
        if fmt == "xyz":
            with open(path, "w") as fh:
                for x, y, z in pts:
                    fh.write(f"{x:.{digits}g} {y:.{digits}g} {z:.{digits}g}\n")
        elif fmt == "ply":
            header = (
                "ply\nformat binary_little_endian 1.0\n"
                f"element vertex {len(cloud)}\n"
                "property double x\nproperty double y\nproperty double z\n"
                "end_header\n"
            )
            with open(path, "wb") as fh:
                fh.write(header.encode("ascii"))
                fh.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())
        elif fmt == "ply-ascii":
            with open(path, "w") as fh:
                fh.write(
                    "ply\nformat ascii 1.0\n"
                    f"element vertex {len(cloud)}\n"
                    "property double x\nproperty double y\nproperty double z\n"
                    "end_header\n"
                )
                for x, y, z in pts:
                    fh.write(f"{x:.{digits}g} {y:.{digits}g} {z:.{digits}g}\n")
        else:
            raise MalformedFile(f"unknown format {fmt!r} for {path}")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
