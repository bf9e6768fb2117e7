"""Indexed triangle meshes: primitives, transforms, and OBJ text export.

Conventions: z-up right-handed coordinates, counter-clockwise winding seen
from outside, abstract model units. Positions are float64 internally; the
wire format narrows to float32 at encode time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from parasync import kernels


class MeshError(ValueError):
    """Invalid mesh data or transform argument."""


@dataclass(eq=False)
class Mesh:
    """Immutable indexed triangle mesh.

    positions/normals are (V, 3) float64, triangles (T, 3) uint32. Flat
    3*N sequences are accepted and reshaped. Normals are optional and must
    be unit length within 1e-4.
    """

    positions: np.ndarray
    triangles: np.ndarray = field(default_factory=lambda: np.empty((0, 3), np.uint32))
    normals: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions", _as_coords(self.positions, "positions"))
        object.__setattr__(self, "triangles", _as_indices(self.triangles))
        if self.normals is not None:
            n = _as_coords(self.normals, "normals")
            if n.shape != self.positions.shape:
                raise MeshError(
                    f"normals shape {n.shape} != positions shape {self.positions.shape}")
            lengths = np.linalg.norm(n, axis=1)
            if len(n) and not np.allclose(lengths, 1.0, atol=1e-4):
                raise MeshError("normals must be unit length within 1e-4")
            object.__setattr__(self, "normals", n)
        if len(self.triangles) and int(self.triangles.max()) >= len(self.positions):
            raise MeshError(
                f"triangle index {int(self.triangles.max())} out of range "
                f"for {len(self.positions)} vertices")
        for arr in (self.positions, self.triangles, self.normals):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def vertex_count(self) -> int:
        return len(self.positions)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(min_xyz, max_xyz) arrays, or None for an empty mesh."""
        if not self.vertex_count:
            return None
        return self.positions.min(axis=0), self.positions.max(axis=0)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        if (self.normals is None) != (other.normals is None):
            return False
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.triangles, other.triangles)
                and (self.normals is None
                     or np.array_equal(self.normals, other.normals)))


def _as_coords(data, label: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        if arr.size % 3:
            raise MeshError(f"{label} length {arr.size} not divisible by 3")
        arr = arr.reshape(-1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise MeshError(f"{label} must be a flat 3*N sequence or an (N, 3) array")
    if not np.isfinite(arr).all():
        raise MeshError(f"{label} contain non-finite values")
    return np.ascontiguousarray(arr)


def _as_indices(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        raise MeshError("triangle indices must be integers")
    if arr.size and arr.min() < 0:
        raise MeshError("triangle indices must be non-negative")
    arr = arr.astype(np.uint32)
    if arr.ndim == 1:
        if arr.size % 3:
            raise MeshError(f"triangles length {arr.size} not divisible by 3")
        arr = arr.reshape(-1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise MeshError("triangles must be a flat 3*T sequence or a (T, 3) array")
    return np.ascontiguousarray(arr)


EMPTY_MESH = Mesh(positions=np.empty((0, 3), np.float64))


# --- primitives ----------------------------------------------------------------

_BOX_TRIANGLES = np.array([
    (0, 2, 3), (0, 3, 1),   # bottom, -z
    (4, 5, 7), (4, 7, 6),   # top, +z
    (0, 1, 5), (0, 5, 4),   # front, -y
    (2, 6, 7), (2, 7, 3),   # back, +y
    (0, 4, 6), (0, 6, 2),   # left, -x
    (1, 7, 5), (1, 3, 7),   # right, +x
], dtype=np.uint32)


def _require_positive(**dims):
    for label, v in dims.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MeshError(f"{label} must be a number, got {type(v).__name__}")
        if not math.isfinite(v) or v <= 0:
            raise MeshError(f"{label} must be positive and finite, got {v}")


def make_box(w: float, h: float, d: float) -> Mesh:
    """Closed axis-aligned box spanning {0,w} x {0,h} x {0,d}."""
    _require_positive(width=w, height=h, depth=d)
    corners = np.array([
        (0, 0, 0), (w, 0, 0), (0, h, 0), (w, h, 0),
        (0, 0, d), (w, 0, d), (0, h, d), (w, h, d),
    ], dtype=np.float64)
    return Mesh(positions=corners, triangles=_BOX_TRIANGLES)


def make_cylinder(radius: float, height: float, segments: int) -> Mesh:
    """Closed capped cylinder along +z: 2*segments+2 vertices, 4*segments triangles."""
    _require_positive(radius=radius, height=height)
    if not isinstance(segments, (int, np.integer)) or isinstance(segments, bool):
        raise MeshError(f"segments must be an integer, got {segments!r}")
    if segments < 3:
        raise MeshError(f"segments must be >= 3, got {segments}")
    n = int(segments)
    theta = 2.0 * np.pi * np.arange(n) / n
    ring = np.column_stack([radius * np.cos(theta), radius * np.sin(theta),
                            np.zeros(n)])
    top = ring + (0.0, 0.0, height)
    positions = np.vstack([ring, top, [(0, 0, 0), (0, 0, height)]])
    bc, tc = 2 * n, 2 * n + 1
    tris = []
    for k in range(n):
        k1 = (k + 1) % n
        tris.append((k, k1, n + k1))        # side lower
        tris.append((k, n + k1, n + k))     # side upper
        tris.append((bc, k1, k))            # bottom cap, faces -z
        tris.append((tc, n + k, n + k1))    # top cap, faces +z
    return Mesh(positions=positions, triangles=np.array(tris, dtype=np.uint32))


# --- transforms ------------------------------------------------------------------

def _require_finite(**vals):
    for label, v in vals.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise MeshError(f"{label} must be a finite number, got {v!r}")


def translate(mesh: Mesh, dx: float, dy: float, dz: float) -> Mesh:
    _require_finite(dx=dx, dy=dy, dz=dz)
    return Mesh(positions=mesh.positions + (dx, dy, dz),
                triangles=mesh.triangles, normals=mesh.normals)


def rotate_z(mesh: Mesh, degrees: float) -> Mesh:
    """Rotate about the z axis through the origin."""
    _require_finite(degrees=degrees)
    rad = math.radians(degrees)
    normals = mesh.normals
    if normals is not None:
        normals = kernels.rotate_z_positions(normals, rad)
    return Mesh(positions=kernels.rotate_z_positions(mesh.positions, rad),
                triangles=mesh.triangles, normals=normals)


def scale(mesh: Mesh, sx: float, sy: float, sz: float) -> Mesh:
    """Scale about the origin. Reflections (negative factors) flip the
    triangle winding so the surface stays outward-facing."""
    _require_finite(sx=sx, sy=sy, sz=sz)
    if sx == 0 or sy == 0 or sz == 0:
        raise MeshError("scale factors must be nonzero")
    positions = mesh.positions * (sx, sy, sz)
    triangles = mesh.triangles
    if sx * sy * sz < 0:
        triangles = triangles[:, ::-1]
    normals = mesh.normals
    if normals is not None and len(normals):
        # normals transform by the adjugate of diag(s)
        adj = normals * (sy * sz, sx * sz, sx * sy)
        adj /= np.linalg.norm(adj, axis=1)[:, None]
        normals = adj
    return Mesh(positions=positions, triangles=triangles, normals=normals)


def twist(mesh: Mesh, degrees: float) -> Mesh:
    """Rotate each vertex about z by degrees * (z - z_min)/(z_max - z_min).

    A flat mesh (z_max == z_min) twists by zero. Normals, when present, are
    recomputed since the deformation is not affine.
    """
    _require_finite(degrees=degrees)
    positions = kernels.twist_positions(mesh.positions, math.radians(degrees))
    out = Mesh(positions=positions, triangles=mesh.triangles)
    if mesh.normals is not None:
        out = compute_normals(out)
    return out


def linear_array(mesh: Mesh, count: int, dx: float, dy: float, dz: float) -> Mesh:
    """Concatenate `count` copies, copy k offset by k*(dx, dy, dz)."""
    if not isinstance(count, (int, np.integer)) or isinstance(count, bool) or count < 1:
        raise MeshError(f"count must be an integer >= 1, got {count!r}")
    _require_finite(dx=dx, dy=dy, dz=dz)
    count = int(count)
    if count == 1:
        return mesh
    offsets = np.arange(count)[:, None] * np.array([dx, dy, dz])
    positions = (mesh.positions[None, :, :] + offsets[:, None, :]).reshape(-1, 3)
    rebase = (np.arange(count) * mesh.vertex_count).astype(np.uint32)
    triangles = (mesh.triangles[None, :, :] + rebase[:, None, None]).reshape(-1, 3)
    normals = None
    if mesh.normals is not None:
        normals = np.tile(mesh.normals, (count, 1))
    return Mesh(positions=positions, triangles=triangles, normals=normals)


def merge(meshes: list[Mesh]) -> Mesh:
    """Concatenate meshes, rebasing triangle indices. merge([]) is empty."""
    if not meshes:
        return EMPTY_MESH
    positions = np.vstack([m.positions for m in meshes])
    parts = []
    base = 0
    for m in meshes:
        parts.append(m.triangles.astype(np.uint64) + base)
        base += m.vertex_count
    triangles = np.vstack(parts)
    if triangles.size and triangles.max() >= 2 ** 32:
        raise MeshError("merged mesh exceeds the uint32 index range")
    normals = None
    if all(m.normals is not None for m in meshes):
        normals = np.vstack([m.normals for m in meshes])
    return Mesh(positions=positions, triangles=triangles.astype(np.uint32),
                normals=normals)


def compute_normals(mesh: Mesh) -> Mesh:
    """Mesh with per-vertex normals from area-weighted face averaging."""
    normals = kernels.accumulate_vertex_normals(mesh.positions, mesh.triangles)
    return Mesh(positions=mesh.positions, triangles=mesh.triangles,
                normals=normals)


# --- OBJ text -------------------------------------------------------------------

def export_obj(mesh: Mesh) -> str:
    """Wavefront OBJ text: `v x y z` then 1-based `f a b c`, 6 significant digits."""
    lines = [f"# parasync mesh: {mesh.vertex_count} vertices, "
             f"{mesh.triangle_count} triangles"]
    for x, y, z in mesh.positions:
        lines.append(f"v {x:.6g} {y:.6g} {z:.6g}")
    for a, b, c in mesh.triangles + 1:
        lines.append(f"f {a} {b} {c}")
    return "\n".join(lines) + "\n"


def parse_obj(text: str) -> Mesh:
    """Minimal OBJ reader for `v` and `f` records (test oracle for export_obj).

    Faces with more than 3 vertices are fan-triangulated; `a/b/c` index
    forms use the position index; other record types are ignored.
    """
    positions: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] == "v":
            if len(fields) < 4:
                raise MeshError(f"bad vertex record: {line!r}")
            positions.append(tuple(float(v) for v in fields[1:4]))
        elif fields[0] == "f":
            if len(fields) < 4:
                raise MeshError(f"bad face record: {line!r}")
            idx = [int(f.split("/")[0]) for f in fields[1:]]
            idx = [i - 1 if i > 0 else len(positions) + i for i in idx]
            for k in range(1, len(idx) - 1):
                triangles.append((idx[0], idx[k], idx[k + 1]))
    if not positions:
        return EMPTY_MESH
    return Mesh(positions=np.array(positions, dtype=np.float64),
                triangles=np.array(triangles, dtype=np.uint32).reshape(-1, 3))
