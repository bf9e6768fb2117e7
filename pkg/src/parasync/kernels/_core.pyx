# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-vertex kernels for the mesh hot path.

Same call signatures as kernels._numpy_impl; the package selects one of the
two at import time.
"""

from libc.math cimport cos, sin, sqrt

import numpy as np

BACKEND = "c"


def twist_positions(pos, double angle_rad):
    """Rotate each vertex about the z axis by angle_rad * (z - zmin)/(zmax - zmin)."""
    cdef const double[:, ::1] src = pos
    cdef Py_ssize_t n = src.shape[0]
    out_arr = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    cdef double zmin, zmax, span, a, c, s, x, y, z
    if n == 0:
        return out_arr
    zmin = src[0, 2]
    zmax = src[0, 2]
    for i in range(n):
        z = src[i, 2]
        if z < zmin:
            zmin = z
        if z > zmax:
            zmax = z
    span = zmax - zmin
    if span == 0.0 or angle_rad == 0.0:
        # flat meshes twist by zero
        out_arr[:, :] = pos
        return out_arr
    for i in range(n):
        x = src[i, 0]
        y = src[i, 1]
        z = src[i, 2]
        a = angle_rad * (z - zmin) / span
        c = cos(a)
        s = sin(a)
        out[i, 0] = c * x - s * y
        out[i, 1] = s * x + c * y
        out[i, 2] = z
    return out_arr


def rotate_z_positions(pos, double angle_rad):
    """Rotate all vertices about the z axis through the origin."""
    cdef const double[:, ::1] src = pos
    cdef Py_ssize_t n = src.shape[0]
    out_arr = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double c = cos(angle_rad)
    cdef double s = sin(angle_rad)
    cdef Py_ssize_t i
    cdef double x, y
    for i in range(n):
        x = src[i, 0]
        y = src[i, 1]
        out[i, 0] = c * x - s * y
        out[i, 1] = s * x + c * y
        out[i, 2] = src[i, 2]
    return out_arr


def accumulate_vertex_normals(pos, tris):
    """Area-weighted per-vertex normals; vertices on no triangle get +z."""
    cdef const double[:, ::1] p = pos
    cdef const unsigned int[:, ::1] t = tris
    cdef Py_ssize_t nv = p.shape[0]
    cdef Py_ssize_t nt = t.shape[0]
    acc_arr = np.zeros((nv, 3), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef Py_ssize_t i, k
    cdef unsigned int a, b, c
    cdef double e1x, e1y, e1z, e2x, e2y, e2z, nx, ny, nz, norm
    for i in range(nt):
        a = t[i, 0]
        b = t[i, 1]
        c = t[i, 2]
        e1x = p[b, 0] - p[a, 0]
        e1y = p[b, 1] - p[a, 1]
        e1z = p[b, 2] - p[a, 2]
        e2x = p[c, 0] - p[a, 0]
        e2y = p[c, 1] - p[a, 1]
        e2z = p[c, 2] - p[a, 2]
        # cross product length is twice the face area: the weight
        nx = e1y * e2z - e1z * e2y
        ny = e1z * e2x - e1x * e2z
        nz = e1x * e2y - e1y * e2x
        for k in range(3):
            acc[t[i, k], 0] += nx
            acc[t[i, k], 1] += ny
            acc[t[i, k], 2] += nz
    for i in range(nv):
        norm = sqrt(acc[i, 0] ** 2 + acc[i, 1] ** 2 + acc[i, 2] ** 2)
        if norm > 0.0:
            acc[i, 0] /= norm
            acc[i, 1] /= norm
            acc[i, 2] /= norm
        else:
            acc[i, 0] = 0.0
            acc[i, 1] = 0.0
            acc[i, 2] = 1.0
    return acc_arr
