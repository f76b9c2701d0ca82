import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eulerbench.errors import InvalidMesh
from eulerbench.mesh import EAST, NORTH, SOUTH, WEST, Boundary, build_uniform_mesh

OPPOSITE = {WEST: EAST, EAST: WEST, SOUTH: NORTH, NORTH: SOUTH}


def test_two_by_two_periodic_counts():
    mesh = build_uniform_mesh(2, 2, (0, 1, 0, 1), Boundary.PERIODIC)
    conn = mesh.connectivity
    assert conn.n_faces == 8
    assert conn.boundary_faces.size == 0
    assert (conn.neighbors >= 0).all()
    assert mesh.dx == mesh.dy == 0.5


def test_two_by_two_transmissive_counts():
    conn = build_uniform_mesh(2, 2, (0, 1, 0, 1), Boundary.TRANSMISSIVE).connectivity
    assert conn.interior_faces.size == 4
    assert conn.boundary_faces.size == 8


def test_vortex_mesh_geometry():
    mesh = build_uniform_mesh(20, 20, (-5, 5, -5, 5))
    conn = mesh.connectivity
    assert mesh.dx == mesh.dy == 0.5
    assert mesh.volume == 0.25
    assert conn.interior_faces.size == 800
    pairs = {(int(a), int(b)) for a, b in zip(conn.left, conn.right)}
    assert len(pairs) == 800


@pytest.mark.parametrize("nx, ny, bounds", [
    (1, 5, (0, 1, 0, 1)),
    (5, 1, (0, 1, 0, 1)),
    (4, 4, (1, 1, 0, 1)),
    (4, 4, (0, 1, 2, -1)),
    (4, 4, (0, np.inf, 0, 1)),
])
def test_invalid_meshes(nx, ny, bounds):
    with pytest.raises(InvalidMesh):
        build_uniform_mesh(nx, ny, bounds)


@pytest.mark.parametrize("boundary", list(Boundary))
def test_every_element_has_four_faces(boundary):
    mesh = build_uniform_mesh(5, 3, (0, 5, 0, 3), boundary)
    ef = mesh.connectivity.element_faces
    assert (ef >= 0).all()
    # each element's face lists it on the correct side
    conn = mesh.connectivity
    for m in range(mesh.n_elements):
        assert conn.right[ef[m, WEST]] == m and conn.left[ef[m, EAST]] == m
        assert conn.right[ef[m, SOUTH]] == m and conn.left[ef[m, NORTH]] == m


def test_periodic_neighbor_of_neighbor_is_identity():
    mesh = build_uniform_mesh(6, 4, (0, 6, 0, 4))
    nb = mesh.connectivity.neighbors
    for m in range(mesh.n_elements):
        for side, opp in OPPOSITE.items():
            assert nb[nb[m, side], opp] == m


def test_normals_are_unit_and_axis_aligned():
    conn = build_uniform_mesh(4, 3, (0, 1, 0, 1), Boundary.TRANSMISSIVE).connectivity
    n = conn.normals
    np.testing.assert_array_equal(np.abs(n).sum(axis=1), 1.0)
    assert set(map(tuple, n)) <= {(1.0, 0.0), (0.0, 1.0)}
    assert (n[:conn.n_xfaces] == (1.0, 0.0)).all()


def test_face_ordering_is_deterministic():
    a = build_uniform_mesh(7, 5, (0, 1, 0, 1)).connectivity
    b = build_uniform_mesh(7, 5, (0, 1, 0, 1)).connectivity
    np.testing.assert_array_equal(a.left, b.left)
    np.testing.assert_array_equal(a.right, b.right)


def test_volume_sum_equals_area():
    mesh = build_uniform_mesh(13, 7, (-1.5, 2.0, 0.3, 1.1))
    area = 3.5 * 0.8
    assert abs(mesh.n_elements * mesh.volume - area) <= 1e-12 * area


def test_jacobian_and_metric():
    mesh = build_uniform_mesh(4, 8, (0, 2, 0, 2))
    assert mesh.jacobian == pytest.approx(mesh.dx * mesh.dy / 4)
    assert mesh.metric == (2 / mesh.dx, 2 / mesh.dy)


def test_solution_point_coords_examples():
    mesh = build_uniform_mesh(2, 2, (0, 1, 0, 1))
    assert mesh.solution_point_coords(0, 0.0, 0.0) == (0.25, 0.25)
    assert mesh.solution_point_coords(3, -1.0, -1.0) == (0.5, 0.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 59), st.floats(-1, 1), st.floats(-1, 1))
def test_affine_round_trip(m, xi, eta):
    mesh = build_uniform_mesh(10, 6, (-5, 5, -3, 3))
    x, y = mesh.solution_point_coords(m, xi, eta)
    xi2, eta2 = mesh.reference_coords(m, x, y)
    assert abs(xi2 - xi) < 1e-14 and abs(eta2 - eta) < 1e-14


def test_transmissive_boundary_marks_ghost_side():
    mesh = build_uniform_mesh(3, 3, (0, 1, 0, 1), Boundary.TRANSMISSIVE)
    nb = mesh.connectivity.neighbors
    assert nb[0, WEST] == -1 and nb[0, SOUTH] == -1
    assert nb[8, EAST] == -1 and nb[8, NORTH] == -1
    assert nb[4].tolist() == [3, 5, 1, 7]


def test_point_grid_orders_x_fastest():
    mesh = build_uniform_mesh(2, 2, (0, 2, 0, 2))
    x, y = mesh.point_grid(np.array([-1.0, 1.0]))
    np.testing.assert_array_equal(x[0], [0, 1, 0, 1])
    np.testing.assert_array_equal(y[0], [0, 0, 1, 1])
