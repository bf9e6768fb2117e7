"""Vectorized numpy fallback for the mesh kernels.

Mirrors kernels._core exactly; used when the compiled extension is absent
(or forced via PARASYNC_KERNELS=python).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def twist_positions(pos: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rotate each vertex about the z axis by angle_rad * (z - zmin)/(zmax - zmin)."""
    out = np.array(pos, dtype=np.float64, copy=True)
    if len(out) == 0 or angle_rad == 0.0:
        return out
    z = out[:, 2]
    zmin, zmax = z.min(), z.max()
    if zmax == zmin:
        return out
    a = angle_rad * (z - zmin) / (zmax - zmin)
    c, s = np.cos(a), np.sin(a)
    x, y = out[:, 0].copy(), out[:, 1].copy()
    out[:, 0] = c * x - s * y
    out[:, 1] = s * x + c * y
    return out


def rotate_z_positions(pos: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rotate all vertices about the z axis through the origin."""
    out = np.array(pos, dtype=np.float64, copy=True)
    if len(out) == 0:
        return out
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    x, y = out[:, 0].copy(), out[:, 1].copy()
    out[:, 0] = c * x - s * y
    out[:, 1] = s * x + c * y
    return out


def accumulate_vertex_normals(pos: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Area-weighted per-vertex normals; vertices on no triangle get +z."""
    acc = np.zeros((len(pos), 3), dtype=np.float64)
    if len(tris):
        a = pos[tris[:, 0]]
        # cross product length is twice the face area: the weight
        face = np.cross(pos[tris[:, 1]] - a, pos[tris[:, 2]] - a)
        for k in range(3):
            np.add.at(acc, tris[:, k], face)
    norms = np.linalg.norm(acc, axis=1)
    zero = norms == 0.0
    norms[zero] = 1.0
    acc /= norms[:, None]
    acc[zero] = (0.0, 0.0, 1.0)
    return acc
