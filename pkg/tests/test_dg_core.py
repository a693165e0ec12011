import numpy as np
import pytest

from brinkman.dg_core import (QuadratureOrders, StressField, StressSpace, face_average_kdiv, face_jump,
                              face_quadrature, face_traces, l2_project_vector)
from brinkman.errors import AssemblyError, ConfigError
from brinkman.mesh import crisscross_grid, set_permeability
from brinkman.quadrature import triangle_rule


def test_quadrature_orders():
    assert QuadratureOrders().form_degree(2) == 6
    assert QuadratureOrders().data_degree(2) == 10
    assert QuadratureOrders(bump=3).data_degree(1) == 11
    assert QuadratureOrders(data=18, bump=5).data_degree(4) == 20
    assert QuadratureOrders(form=9).form_degree(1) == 9


def test_space_sizes(mixed_mesh):
    space = StressSpace(mixed_mesh, 1)
    assert space.dofs_per_element == 9
    assert space.ndofs == 72
    assert StressSpace(mixed_mesh, 3).ndofs == 8 * 30
    assert np.array_equal(space.element_dofs[2], np.arange(18, 27))


def test_constant_tensor_has_no_interior_jumps(crisscross_mesh):
    space = StressSpace(crisscross_mesh, 2)
    field = space.interpolate_constant([[1.0, 0.3], [0.3, -2.0]])
    fq = face_quadrature(crisscross_mesh, crisscross_mesh.interior_faces, 6)
    jump, avg = face_traces(field, fq)
    assert np.allclose(jump, 0.0, atol=1e-13)
    assert np.allclose(avg, 0.0, atol=1e-12)
    rule = triangle_rule(2)
    assert np.allclose(field.values(rule.points), [[1.0, 0.3], [0.3, -2.0]])


def test_boundary_jump_is_normal_component(crisscross_mesh):
    space = StressSpace(crisscross_mesh, 1)
    tensor = np.array([[2.0, 1.0], [1.0, 3.0]])
    field = space.interpolate_constant(tensor)
    face = crisscross_mesh.neumann_faces[0]
    n = crisscross_mesh.face_normals[face]
    assert np.allclose(face_jump(field, face, s=[0.2, 0.7]), tensor @ n)


def test_interpolate_constant_rejects_asymmetric(mixed_mesh):
    with pytest.raises(ConfigError):
        StressSpace(mixed_mesh, 1).interpolate_constant([[1.0, 2.0], [0.0, 1.0]])


def test_projection_reproduces_polynomials(crisscross_mesh):
    space = StressSpace(crisscross_mesh, 2)

    def tensor(x):
        X, Y = x[..., 0], x[..., 1]
        xy = X * Y - 0.5
        return np.stack([np.stack([X ** 2, xy], -1), np.stack([xy, 1.0 + Y], -1)], -2)

    field = space.project(tensor)
    rule = triangle_rule(4)
    x = crisscross_mesh.to_physical(rule.points)
    assert np.allclose(field.values(rule.points), tensor(x), atol=1e-12)
    # div = (2x + x, y + 1)
    X = x[..., 0]
    assert np.allclose(field.divergence(rule.points), np.stack([3 * X, x[..., 1] + 1.0], -1), atol=1e-11)


def test_trace_integral_and_norm(mixed_mesh):
    identity = StressSpace(mixed_mesh, 2).interpolate_constant(np.eye(2))
    assert identity.trace_integral() == pytest.approx(2.0)
    assert identity.l2_norm() == pytest.approx(np.sqrt(2.0))
    doubled = identity + identity * 0.5
    assert doubled.trace_integral() == pytest.approx(3.0)


def test_field_size_checked(mixed_mesh):
    with pytest.raises(ConfigError):
        StressField(StressSpace(mixed_mesh, 1), np.zeros(5))


def test_vector_projection_is_orthogonal(mixed_mesh):
    def f(x):
        return np.stack([x[..., 0] ** 2, np.zeros(x.shape[:-1])], -1)

    proj = l2_project_vector(f, 1, mixed_mesh)
    rule = triangle_rule(6)
    x = mixed_mesh.to_physical(rule.points)
    residual = f(x) - proj.values(rule.points)
    # orthogonal to 1, x and y on every element
    for test in (np.ones_like(x[..., 0]), x[..., 0], x[..., 1]):
        moments = np.einsum('q,kqc,kq,k->kc', rule.weights, residual, test, mixed_mesh.det_jacobians)
        assert np.allclose(moments, 0.0, atol=1e-13)


def test_jump_and_average_independent_of_neighbour_order(crisscross_mesh, rng):
    mesh = set_permeability(crisscross_mesh, lambda c: 1.0 + c[:, 0])
    space = StressSpace(mesh, 2)
    field = StressField(space, rng.standard_normal(space.ndofs))
    for face in mesh.interior_faces[:6]:
        s = np.linspace(0.1, 0.9, 4)
        assert np.allclose(face_jump(field, face, s), face_jump(field, face, s, swap=True))
        assert np.allclose(face_average_kdiv(field, face, s), face_average_kdiv(field, face, s, swap=True))


def test_average_weights_by_kappa():
    mesh = set_permeability(crisscross_grid(1), [1.0, 2.0, 3.0, 4.0])
    space = StressSpace(mesh, 1)

    def tensor(x):
        X = x[..., 0]
        zero = np.zeros_like(X)
        return np.stack([np.stack([X, zero], -1), np.stack([zero, zero], -1)], -2)

    field = space.project(tensor)
    face = mesh.interior_faces[0]
    K, L = mesh.face_elements[face]
    # div tau = (1, 0) everywhere
    expected = 0.5 * (mesh.kappa[K] + mesh.kappa[L])
    assert np.allclose(face_average_kdiv(field, face, s=[0.5]), [[expected, 0.0]])


def test_dirichlet_faces_are_not_dg_faces(mixed_mesh):
    field = StressSpace(mixed_mesh, 1).zero_field()
    with pytest.raises(AssemblyError):
        face_jump(field, mixed_mesh.dirichlet_faces[0])
