import numpy as np
import pytest

from brinkman.errors import MeshError
from brinkman.mesh import (ALL_DIRICHLET, CHANNEL_BOUNDARY, DIRICHLET, INTERIOR, NEUMANN, MIXED_BOUNDARY,
                           BoundarySpec, Mesh, assign_subdomains, barycentric_trisect, classify_boundary,
                           crisscross_grid, diagonal_grid, read_mesh, set_permeability, write_mesh)


@pytest.mark.parametrize("family, n, elements, vertices", [
    (diagonal_grid, 1, 2, 4),
    (diagonal_grid, 4, 32, 25),
    (crisscross_grid, 2, 16, 13),
    (crisscross_grid, 3, 36, 25),
])
def test_grid_sizes(family, n, elements, vertices):
    mesh = family(n)
    assert mesh.num_elements == elements
    assert mesh.num_vertices == vertices
    assert mesh.euler_characteristic == 1
    assert mesh.areas.sum() == pytest.approx(1.0)
    assert np.all(mesh.areas > 0)


def test_mesh_size_is_cell_diagonal():
    assert diagonal_grid(2).h == pytest.approx(np.sqrt(2) / 2)
    assert crisscross_grid(2).h == pytest.approx(0.5)


def test_bad_grid_size():
    for n in (0, -2, 1.5, True):
        with pytest.raises(MeshError):
            diagonal_grid(n)


def test_face_topology(crisscross_mesh):
    mesh = crisscross_mesh
    assert np.allclose(np.linalg.norm(mesh.face_normals, axis=1), 1.0)
    interior = mesh.interior_faces
    counts = np.bincount(mesh.element_faces.ravel(), minlength=mesh.num_faces)
    assert np.all(counts[interior] == 2)
    assert np.all(counts[mesh.boundary_faces] == 1)
    assert np.all(mesh.face_elements[interior, 0] < mesh.face_elements[interior, 1])
    assert len(mesh.boundary_faces) == 8


def test_normals_point_out_of_first_element():
    mesh = crisscross_grid(3)
    owner = mesh.centroids[mesh.face_elements[:, 0]]
    outward = np.einsum('fd,fd->f', mesh.face_normals, mesh.face_midpoints - owner)
    assert np.all(outward > 0)


def test_boundary_normals_point_out_of_the_square():
    mesh = diagonal_grid(3)
    bnd = mesh.boundary_faces
    centre = np.array([0.5, 0.5])
    assert np.all(np.einsum('fd,fd->f', mesh.face_normals[bnd], mesh.face_midpoints[bnd] - centre) > 0)


def test_element_face_signs():
    mesh = diagonal_grid(2)
    for K in range(mesh.num_elements):
        for i, f in enumerate(mesh.element_faces[K]):
            expected = 1.0 if mesh.face_elements[f, 0] == K else -1.0
            assert mesh.element_face_signs[K, i] == expected


def test_clockwise_triangles_are_reoriented():
    mesh = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])
    assert mesh.areas[0] == pytest.approx(0.5)
    assert mesh.det_jacobians[0] > 0


def test_degenerate_triangle_rejected():
    with pytest.raises(MeshError):
        Mesh([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]])


def test_unknown_vertex_rejected():
    with pytest.raises(MeshError):
        Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 3]])


def test_reference_map_round_trip(rng):
    mesh = crisscross_grid(2)
    ref = rng.random((5, 2)) * 0.5
    phys = mesh.to_physical(ref)
    back = mesh.to_reference(phys, np.arange(mesh.num_elements))
    assert np.allclose(back, ref[None])


def test_mixed_boundary_layout(mixed_mesh):
    mids = mixed_mesh.face_midpoints
    dirichlet = mixed_mesh.dirichlet_faces
    neumann = mixed_mesh.neumann_faces
    assert np.all((mids[dirichlet, 0] < 1e-12) | (mids[dirichlet, 1] > 1 - 1e-12))
    assert np.all((mids[neumann, 0] > 1e-12) & (mids[neumann, 1] < 1 - 1e-12))
    assert len(dirichlet) == 4 and len(neumann) == 4
    assert mixed_mesh.theta == 0
    assert set(mixed_mesh.dg_faces) == set(mixed_mesh.interior_faces) | set(neumann)


def test_all_dirichlet_has_theta_one(dirichlet_mesh):
    assert dirichlet_mesh.theta == 1
    assert len(dirichlet_mesh.neumann_faces) == 0
    assert ALL_DIRICHLET.theta(diagonal_grid(1)) == 1
    assert MIXED_BOUNDARY.theta(diagonal_grid(1)) == 0


def test_default_boundary_is_dirichlet():
    mesh = diagonal_grid(2)
    assert np.all(mesh.face_tags[mesh.boundary_faces] == DIRICHLET)
    assert np.all(mesh.face_tags[mesh.interior_faces] == INTERIOR)


def test_channel_outlet_is_neumann():
    mesh = classify_boundary(diagonal_grid(2), CHANNEL_BOUNDARY)
    assert np.allclose(mesh.face_midpoints[mesh.neumann_faces, 0], 1.0)


def test_boundary_split_must_fall_on_vertices():
    spec = BoundarySpec("left-part", lambda p: p[:, 1] < 0.3)
    with pytest.raises(MeshError, match="straddles"):
        classify_boundary(diagonal_grid(2), spec)


def test_layout_without_dirichlet_rejected():
    with pytest.raises(MeshError):
        classify_boundary(diagonal_grid(2), BoundarySpec("free", lambda p: np.zeros(len(p), dtype=bool)))


def test_trisect_keeps_data():
    mesh = set_permeability(diagonal_grid(2), np.arange(1.0, 9.0))
    fine = barycentric_trisect(mesh)
    assert fine.num_elements == 24
    assert fine.areas.sum() == pytest.approx(1.0)
    assert np.allclose(fine.kappa, np.repeat(np.arange(1.0, 9.0), 3))
    assert fine.euler_characteristic == 1


def _right_half(points):
    return (points[..., 0] >= 0.5).astype(np.int64)


def test_subdomains_on_aligned_mesh():
    mesh = assign_subdomains(diagonal_grid(2), _right_half)
    assert np.array_equal(mesh.subdomains, _right_half(mesh.centroids))
    assert np.count_nonzero(mesh.subdomains) == 4


def test_subdomains_reject_unaligned_mesh():
    with pytest.raises(MeshError, match="straddles"):
        assign_subdomains(diagonal_grid(3), _right_half)


def test_set_permeability_forms():
    mesh = assign_subdomains(diagonal_grid(2), _right_half)
    assert np.allclose(set_permeability(mesh, 2.0).kappa, 2.0)
    by_domain = set_permeability(mesh, {0: 1.0, 1: 1e-3})
    assert np.allclose(by_domain.kappa, np.where(mesh.subdomains == 1, 1e-3, 1.0))
    by_position = set_permeability(mesh, lambda c: 1.0 + c[:, 0])
    assert np.allclose(by_position.kappa, 1.0 + mesh.centroids[:, 0])


@pytest.mark.parametrize("field", [0.0, -1.0, np.nan, np.ones(3), {0: 1.0}])
def test_set_permeability_errors(field):
    mesh = assign_subdomains(diagonal_grid(2), _right_half)
    with pytest.raises(MeshError):
        set_permeability(mesh, field)


def test_gamma_inverse_takes_larger_kappa():
    mesh = set_permeability(assign_subdomains(diagonal_grid(2), _right_half), {0: 1.0, 1: 1e-4})
    gamma_inv = mesh.face_gamma_inverse()
    fe = mesh.face_elements
    boundary = fe[:, 1] < 0
    assert np.allclose(gamma_inv[boundary], mesh.kappa[fe[boundary, 0]])
    crossing = ~boundary & (mesh.subdomains[fe[:, 0]] != mesh.subdomains[np.maximum(fe[:, 1], 0)])
    assert np.any(crossing)
    assert np.allclose(gamma_inv[crossing], 1.0)


def test_mesh_file_round_trip(tmp_path):
    mesh = set_permeability(crisscross_grid(2), lambda c: 1.0 + c[:, 1])
    path = tmp_path / "square.mesh"
    write_mesh(mesh, path)
    loaded = read_mesh(path)
    assert np.array_equal(loaded.triangles, mesh.triangles)
    assert np.allclose(loaded.vertices, mesh.vertices)
    assert np.allclose(loaded.kappa, mesh.kappa)


@pytest.mark.parametrize("text", [
    "",
    "points 3\n",
    "vertices 3\n0 0\n1 0\n",
    "vertices 3\n0 0\n1 0\n0 1\ntriangles 2\n0 1 2\n",
    "vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 x\n",
])
def test_malformed_mesh_file(tmp_path, text):
    path = tmp_path / "bad.mesh"
    path.write_text(text)
    with pytest.raises(MeshError):
        read_mesh(path)
