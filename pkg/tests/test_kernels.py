from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parasync.kernels import _numpy_impl

try:
    from parasync.kernels import _core
except ImportError:
    _core = None

needs_ext = pytest.mark.skipif(_core is None, reason="compiled kernels not built")

coords = st.lists(
    st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50)),
    min_size=0, max_size=64,
)


def as_positions(pts) -> np.ndarray:
    return np.array(pts, dtype=np.float64).reshape(-1, 3)


def random_triangles(rng: np.random.Generator, nv: int, nt: int) -> np.ndarray:
    return rng.integers(0, nv, size=(nt, 3)).astype(np.uint32)


@needs_ext
@settings(max_examples=100, deadline=None)
@given(pts=coords, angle=st.floats(-720, 720, allow_nan=False))
def test_twist_backends_agree(pts, angle):
    pos = as_positions(pts)
    rad = np.radians(angle)
    a = _core.twist_positions(pos, rad)
    b = _numpy_impl.twist_positions(pos, rad)
    assert a.shape == b.shape == pos.shape
    assert np.allclose(a, b, atol=1e-9)


@needs_ext
@settings(max_examples=100, deadline=None)
@given(pts=coords, angle=st.floats(-720, 720, allow_nan=False))
def test_rotate_backends_agree(pts, angle):
    pos = as_positions(pts)
    rad = np.radians(angle)
    assert np.allclose(_core.rotate_z_positions(pos, rad),
                       _numpy_impl.rotate_z_positions(pos, rad), atol=1e-9)


@needs_ext
def test_normal_backends_agree():
    rng = np.random.default_rng(7)
    for nv, nt in [(3, 1), (16, 20), (200, 400)]:
        pos = rng.uniform(-5, 5, size=(nv, 3))
        tris = random_triangles(rng, nv, nt)
        a = _core.accumulate_vertex_normals(pos, tris)
        b = _numpy_impl.accumulate_vertex_normals(pos, tris)
        assert np.allclose(a, b, atol=1e-9)


@pytest.mark.parametrize("impl", [i for i in (_core, _numpy_impl) if i is not None])
def test_kernels_handle_empty_input(impl):
    empty = np.empty((0, 3), dtype=np.float64)
    no_tris = np.empty((0, 3), dtype=np.uint32)
    assert impl.twist_positions(empty, 1.0).shape == (0, 3)
    assert impl.rotate_z_positions(empty, 1.0).shape == (0, 3)
    assert impl.accumulate_vertex_normals(empty, no_tris).shape == (0, 3)


@pytest.mark.parametrize("impl", [i for i in (_core, _numpy_impl) if i is not None])
def test_isolated_vertices_get_plus_z_normal(impl):
    pos = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [9, 9, 9]], dtype=np.float64)
    tris = np.array([[0, 1, 2]], dtype=np.uint32)
    normals = impl.accumulate_vertex_normals(pos, tris)
    assert np.allclose(normals[3], [0, 0, 1])
    assert np.allclose(np.linalg.norm(normals, axis=1), 1.0)


def test_selected_backend_exports_api():
    from parasync import kernels

    assert kernels.BACKEND in ("c", "python")
    for name in ("twist_positions", "rotate_z_positions",
                 "accumulate_vertex_normals"):
        assert callable(getattr(kernels, name))
