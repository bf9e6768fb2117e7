from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parasync.geometry import (
    EMPTY_MESH,
    Mesh,
    MeshError,
    compute_normals,
    export_obj,
    linear_array,
    make_box,
    make_cylinder,
    merge,
    parse_obj,
    rotate_z,
    scale,
    translate,
    twist,
)


# --- independent oracles ------------------------------------------------------

def undirected_edges(mesh: Mesh) -> dict[tuple[int, int], int]:
    """Count how many triangles use each undirected edge."""
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in mesh.triangles.tolist():
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            counts[key] = counts.get(key, 0) + 1
    return counts


def assert_closed_manifold(mesh: Mesh):
    edges = undirected_edges(mesh)
    assert all(n == 2 for n in edges.values()), "edge not shared by exactly 2 triangles"
    euler = mesh.vertex_count - len(edges) + mesh.triangle_count
    assert euler == 2


def signed_volume(mesh: Mesh) -> float:
    """Divergence-theorem volume; positive iff winding is outward CCW."""
    p = mesh.positions
    a, b, c = (p[mesh.triangles[:, k]] for k in range(3))
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


# --- mesh type ------------------------------------------------------------------

def test_mesh_accepts_flat_and_nested_input():
    m = Mesh(positions=[0, 0, 0, 1, 0, 0, 0, 1, 0], triangles=[0, 1, 2])
    assert m.vertex_count == 3
    assert m.triangle_count == 1
    assert m.positions.shape == (3, 3)
    assert m.triangles.dtype == np.uint32


def test_mesh_rejects_bad_data():
    with pytest.raises(MeshError):
        Mesh(positions=[0, 0], triangles=[])                      # not 3*V
    with pytest.raises(MeshError):
        Mesh(positions=[0, 0, 0], triangles=[0, 0])               # not 3*T
    with pytest.raises(MeshError):
        Mesh(positions=[0, 0, 0], triangles=[0, 0, 1])            # index >= V
    with pytest.raises(MeshError):
        Mesh(positions=[0, 0, 0], triangles=[0, 0, -1])           # negative index
    with pytest.raises(MeshError):
        Mesh(positions=[0, 0, float("nan")], triangles=[0, 0, 0])
    with pytest.raises(MeshError):
        Mesh(positions=[0, 0, 0], triangles=[0, 0, 0], normals=[1, 0])
    with pytest.raises(MeshError):
        Mesh(positions=[0, 0, 0], triangles=[0, 0, 0], normals=[3, 0, 0])  # not unit


def test_mesh_is_immutable():
    m = make_box(1, 1, 1)
    with pytest.raises(ValueError):
        m.positions[0, 0] = 99.0


# --- primitives -------------------------------------------------------------------

def test_box_counts_and_euler():
    m = make_box(1, 1, 1)
    assert m.vertex_count == 8
    assert m.triangle_count == 12
    assert len(undirected_edges(m)) == 18  # 8 - 18 + 12 == 2
    assert_closed_manifold(m)


def test_box_bounding_box_and_volume():
    m = make_box(2, 3, 4)
    lo, hi = m.bounding_box()
    assert np.array_equal(lo, [0, 0, 0])
    assert np.array_equal(hi, [2, 3, 4])
    assert signed_volume(m) == pytest.approx(24.0, rel=1e-12)


@pytest.mark.parametrize("dims", [(0, 1, 1), (1, -1, 1), (1, 1, 0),
                                  (float("nan"), 1, 1), (float("inf"), 1, 1)])
def test_box_rejects_bad_dimensions(dims):
    with pytest.raises(MeshError):
        make_box(*dims)


def test_cylinder_counts_and_euler():
    m = make_cylinder(1, 2, 3)
    assert m.vertex_count == 8     # 2*3 + 2
    assert m.triangle_count == 12  # 4*3
    assert_closed_manifold(m)
    big = make_cylinder(0.7, 3.5, 17)
    assert big.vertex_count == 2 * 17 + 2
    assert big.triangle_count == 4 * 17
    assert_closed_manifold(big)


def test_cylinder_rim_radius():
    m = make_cylinder(1, 2, 8)
    rim = m.positions[:16]  # two rings of 8
    dist = np.hypot(rim[:, 0], rim[:, 1])
    assert np.allclose(dist, 1.0, atol=1e-6)


def test_cylinder_volume_matches_prism():
    # triangulated cylinder is the prism over the inscribed n-gon
    n, r, h = 3, 1.0, 2.0
    ngon_area = 0.5 * n * r * r * math.sin(2 * math.pi / n)
    assert signed_volume(make_cylinder(r, h, n)) == pytest.approx(ngon_area * h)


def test_cylinder_rejects_bad_args():
    with pytest.raises(MeshError):
        make_cylinder(1, 2, 2)
    with pytest.raises(MeshError):
        make_cylinder(0, 2, 8)
    with pytest.raises(MeshError):
        make_cylinder(1, -2, 8)


# --- transforms ----------------------------------------------------------------

def test_rotate_full_turn_is_identity():
    m = make_box(1, 1, 1)
    r = rotate_z(m, 360)
    assert np.allclose(r.positions, m.positions, atol=1e-5)
    assert np.array_equal(r.triangles, m.triangles)


def test_rotate_then_unrotate_restores():
    m = make_cylinder(1, 2, 8)
    r = rotate_z(rotate_z(m, 37.5), -37.5)
    assert np.allclose(r.positions, m.positions, atol=1e-5)


def test_translate_inverse_restores():
    m = make_box(2, 3, 4)
    r = translate(translate(m, 5.5, -2.25, 10), -5.5, 2.25, -10)
    assert np.allclose(r.positions, m.positions, atol=1e-6)


def test_scale_applies_factors():
    m = scale(make_box(1, 1, 1), 2, 3, 4)
    lo, hi = m.bounding_box()
    assert np.allclose(hi, [2, 3, 4])
    assert signed_volume(m) == pytest.approx(24.0)


def test_scale_with_reflection_keeps_outward_winding():
    m = scale(make_box(1, 1, 1), -1, 1, 1)
    assert signed_volume(m) == pytest.approx(1.0)
    assert_closed_manifold(m)


def test_scale_rejects_zero_factor():
    with pytest.raises(MeshError):
        scale(make_box(1, 1, 1), 0, 1, 1)


def test_twist_zero_is_identity():
    m = make_box(1, 1, 1)
    t = twist(m, 0)
    assert np.array_equal(t.positions, m.positions)


def test_twist_flat_mesh_is_identity():
    flat = Mesh(positions=[0, 0, 0, 1, 0, 0, 0, 1, 0], triangles=[0, 1, 2])
    t = twist(flat, 90)
    assert np.array_equal(t.positions, flat.positions)


def test_twist_rotates_top_by_full_angle():
    m = make_box(1, 1, 2)
    t = twist(m, 90)
    # bottom vertices (z=0) unchanged
    bottom = m.positions[:, 2] == 0
    assert np.allclose(t.positions[bottom], m.positions[bottom])
    # top vertex (1,0,2) lands on (0,1,2) after a 90 degree turn
    idx = np.where((m.positions == [1, 0, 2]).all(axis=1))[0][0]
    assert np.allclose(t.positions[idx], [0, 1, 2], atol=1e-12)


def test_linear_array_counts_and_extent():
    m = linear_array(make_box(1, 1, 1), 3, 2, 0, 0)
    assert m.vertex_count == 24
    assert m.triangle_count == 36
    lo, hi = m.bounding_box()
    assert lo[0] == 0 and hi[0] == 5  # copies at x = 0, 2, 4; each 1 wide
    assert signed_volume(m) == pytest.approx(3.0)


def test_linear_array_single_copy_is_identity():
    m = make_box(1, 2, 3)
    r = linear_array(m, 1, 9, 9, 9)
    assert np.array_equal(r.positions, m.positions)
    assert np.array_equal(r.triangles, m.triangles)


def test_linear_array_rejects_bad_count():
    with pytest.raises(MeshError):
        linear_array(make_box(1, 1, 1), 0, 1, 0, 0)


def test_merge_empty_list_gives_empty_mesh():
    m = merge([])
    assert m.vertex_count == 0
    assert m.triangle_count == 0
    assert m == EMPTY_MESH


def test_merge_concatenates_and_rebases():
    a = make_box(1, 1, 1)
    b = translate(make_box(1, 1, 1), 3, 0, 0)
    m = merge([a, b])
    assert m.vertex_count == 16
    assert m.triangle_count == 24
    assert m.triangles.max() == 15
    assert signed_volume(m) == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(sizes=st.lists(st.tuples(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5)),
                      min_size=0, max_size=5))
def test_merge_fuzz_counts_and_index_range(sizes):
    meshes = [make_box(*s) for s in sizes]
    m = merge(meshes)
    assert m.vertex_count == sum(x.vertex_count for x in meshes)
    assert m.triangle_count == sum(x.triangle_count for x in meshes)
    if m.triangle_count:
        assert int(m.triangles.max()) < m.vertex_count


def test_affine_ops_preserve_counts():
    m = make_cylinder(1, 2, 9)
    for op in (lambda x: translate(x, 1, 2, 3),
               lambda x: rotate_z(x, 123),
               lambda x: scale(x, 2, 2, 2),
               lambda x: twist(x, 45)):
        r = op(m)
        assert r.vertex_count == m.vertex_count
        assert r.triangle_count == m.triangle_count


# --- normals ---------------------------------------------------------------------

def test_compute_normals_unit_length():
    for m in (make_box(1, 2, 3), make_cylinder(1, 2, 12)):
        n = compute_normals(m)
        lengths = np.linalg.norm(n.normals, axis=1)
        assert np.allclose(lengths, 1.0, atol=1e-4)


def test_compute_normals_point_outward():
    m = compute_normals(make_box(2, 2, 2))
    center = np.array([1.0, 1.0, 1.0])
    outward = m.positions - center
    dots = np.einsum("ij,ij->i", m.normals, outward)
    assert (dots > 0).all()


def test_rotate_preserves_normals_unit_length():
    m = compute_normals(make_cylinder(1, 2, 12))
    r = rotate_z(m, 73)
    assert np.allclose(np.linalg.norm(r.normals, axis=1), 1.0, atol=1e-4)


# --- OBJ export -----------------------------------------------------------------

def test_export_obj_line_counts():
    text = export_obj(make_box(1, 1, 1))
    lines = text.splitlines()
    assert sum(1 for ln in lines if ln.startswith("v ")) == 8
    assert sum(1 for ln in lines if ln.startswith("f ")) == 12


def test_export_obj_empty_mesh_is_header_only():
    text = export_obj(EMPTY_MESH)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    assert len(lines) == 1
    assert lines[0].startswith("#")


def test_obj_round_trip():
    m = twist(linear_array(make_box(1, 1, 1), 3, 0, 0, 1.5), 80)
    back = parse_obj(export_obj(m))
    assert back.triangle_count == m.triangle_count
    assert np.allclose(back.positions, m.positions, atol=1e-5)
    assert np.array_equal(back.triangles, m.triangles)


def test_parse_obj_tolerates_comments_and_slashes():
    text = "# hello\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n"
    m = parse_obj(text)
    assert m.vertex_count == 3
    assert m.triangle_count == 1
    assert np.array_equal(m.triangles[0], [0, 1, 2])
