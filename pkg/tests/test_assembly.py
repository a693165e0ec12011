import numpy as np
import pytest

from brinkman.assembly import ProblemData, assemble, consistency_residual, trace_vector
from brinkman.dg_core import QuadratureOrders, StressField, StressSpace
from brinkman.errors import AssemblyError, ConfigError
from brinkman.linalg import dense_min_eigenvalue, direct_solve
from brinkman.mesh import ALL_DIRICHLET, BOUNDARY_LAYOUTS, Mesh, classify_boundary, crisscross_grid, set_permeability
from brinkman.quadrature import MAX_DEGREE
from brinkman.scenarios import zero_problem
from brinkman.verification import smooth_case, polynomial_case


def _system(mesh, case, k=1, **kwargs):
    mesh = case.prepare(mesh)
    case = case.normalised_for(mesh)
    return assemble(StressSpace(mesh, k), case.problem_data(k, **kwargs))


def test_system_shape_and_symmetry(mixed_mesh, case):
    system = _system(mixed_mesh, case)
    assert system.shape == (72, 72)
    assert system.theta == 0
    assert system.rank_one is None
    assert system.operator.asymmetry() < 1e-12


@pytest.mark.parametrize("mesh_fixture", ["mixed_mesh", "dirichlet_mesh"])
@pytest.mark.parametrize("k", [1, 2])
def test_system_is_positive_definite(request, mesh_fixture, k, case):
    system = _system(request.getfixturevalue(mesh_fixture), case, k)
    assert dense_min_eigenvalue(system.operator) > 0


def test_theta_adds_trace_vector(dirichlet_mesh, case):
    system = _system(dirichlet_mesh, case)
    assert system.theta == 1
    t = system.rank_one
    assert np.allclose(t, trace_vector(system.space))
    # (tr I, 1) = 2 |Omega|
    identity = system.space.interpolate_constant(np.eye(2))
    assert t @ identity.coeffs == pytest.approx(2.0)


def test_identity_is_in_kernel_of_sparse_part(dirichlet_mesh, case):
    system = _system(dirichlet_mesh, case, k=2)
    identity = system.space.interpolate_constant(np.eye(2)).coeffs
    assert np.allclose(system.matrix @ identity, 0.0, atol=1e-12)
    assert np.allclose(system.operator @ identity, 2.0 * system.rank_one, atol=1e-12)


def test_single_element_energy():
    mesh = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    space = StressSpace(mesh, 1)

    def tensor(x):
        X = x[..., 0]
        zero = np.zeros_like(X)
        return np.stack([np.stack([X, zero], -1), np.stack([zero, zero], -1)], -2)

    sigma = space.project(tensor)
    system = assemble(space, ProblemData(degree=1))
    # 1/2 |dev sigma|^2 = x^2 / 4, |div sigma|^2 = 1, (tr sigma, 1)^2 = (1/6)^2
    expected = 1.0 / 48 + 0.5 + 1.0 / 36
    assert sigma.coeffs @ (system.operator @ sigma.coeffs) == pytest.approx(expected, rel=1e-12)


def test_coupling_only_between_neighbours(crisscross_mesh, case):
    system = _system(crisscross_mesh, case)
    mesh = system.space.mesh
    bs = system.space.dofs_per_element
    coo = system.matrix.tocoo()
    pairs = set(zip(coo.row // bs, coo.col // bs))
    neighbours = {(K, K) for K in range(mesh.num_elements)}
    for K, L in mesh.face_elements[mesh.interior_faces]:
        neighbours |= {(K, L), (L, K)}
    assert pairs <= neighbours
    assert len(pairs) == len(neighbours)


def test_zero_data_gives_zero_rhs(mixed_mesh):
    system = assemble(StressSpace(mixed_mesh, 2), zero_problem(2))
    assert np.all(system.rhs == 0.0)
    assert np.all(direct_solve(system.operator, system.rhs) == 0.0)


def test_rhs_is_linear_in_data(mixed_mesh, case):
    data = case.problem_data(1)
    space = StressSpace(mixed_mesh, 1)
    base = assemble(space, data)
    tripled = assemble(space, data.scaled(3.0))
    assert np.allclose(tripled.rhs, 3.0 * base.rhs)
    assert (tripled.matrix != base.matrix).nnz == 0


def test_threads_do_not_change_the_matrix(crisscross_mesh, case):
    data = case.problem_data(2)
    space = StressSpace(crisscross_mesh, 2)
    serial = assemble(space, data)
    threaded = assemble(space, data, threads=3)
    assert abs(serial.matrix - threaded.matrix).max() < 1e-12 * abs(serial.matrix).max()
    assert np.allclose(serial.rhs, threaded.rhs)


def test_boundary_argument_reclassifies(mixed_mesh, case):
    system = assemble(StressSpace(mixed_mesh, 1), case.problem_data(1), boundary=ALL_DIRICHLET)
    assert system.theta == 1
    assert system.space.mesh.boundary is ALL_DIRICHLET


def test_problem_data_validation(mixed_mesh):
    with pytest.raises(AssemblyError):
        ProblemData(a_star=0.0)
    with pytest.raises(AssemblyError):
        ProblemData(a_star=-1.0)
    with pytest.raises(ConfigError):
        ProblemData(mu=-1e-3)
    with pytest.raises(AssemblyError):
        assemble(StressSpace(mixed_mesh, 2), ProblemData(degree=1))


def test_penalty_scales_with_degree():
    assert ProblemData(degree=3, a_star=10.0).penalty == 90.0


def test_exact_stress_solves_polynomial_case(mixed_mesh):
    case = polynomial_case(1, mu=1.0)
    mesh = case.prepare(mixed_mesh)
    space = StressSpace(mesh, 1)
    data = case.problem_data(1)
    assert consistency_residual(space, data, None, case) < 1e-11
    system = assemble(space, data)
    sigma = StressField(space, direct_solve(system.operator, system.rhs))
    exact = space.project(case.stress)
    assert np.allclose(sigma.coeffs, exact.coeffs, atol=1e-10)


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("layout", ["mixed", "all-dirichlet"])
def test_smooth_solution_is_consistent(k, layout):
    case = smooth_case(1e-3)
    mesh = case.prepare(classify_boundary(crisscross_grid(4), BOUNDARY_LAYOUTS[layout]))
    case = case.normalised_for(mesh)
    data = case.problem_data(k, orders=QuadratureOrders(data=MAX_DEGREE))
    assert consistency_residual(StressSpace(mesh, k), data, None, case) < 1e-8


def test_consistency_with_piecewise_kappa(crisscross_mesh):
    case = smooth_case(1e-2)
    mesh = set_permeability(crisscross_mesh, lambda c: 0.1 + c[:, 0] * c[:, 1])
    data = case.problem_data(1, orders=QuadratureOrders(data=MAX_DEGREE))
    assert consistency_residual(StressSpace(mesh, 1), data, None, case) < 1e-8
