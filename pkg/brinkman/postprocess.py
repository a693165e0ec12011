"""
Recovery of pressure and velocity from the discrete stress.

    p_h  = -1/2 tr sigma_h                           in P_k(T_h)
    u_h  = (kappa/mu)(div_h sigma_h + Q^{k-1} F)      in P_{k-1}(T_h, R^2)
    u*_h : the H(div)-conforming, exactly divergence-free velocity solving
           (u*, v) + (lambda, div v) = (u_h, v),  (div u*, eta) = 0
           in BDM_m x P_{m-1}, m = max(k - 1, 1)
"""
import logging
from typing import Optional

import numpy as np

from .assembly import ProblemData
from .bdm import BDMField, BDMSpace, MultiplierSpace
from .dg_core import PiecewiseVectorField, StressField, project_local
from .errors import PostprocessError
from .linalg import DEFAULT_TOL, SaddleSystem, saddle_solve
from .mesh import Mesh
from .quadrature import triangle_rule
from .ref_elements import ScalarBasis


logger = logging.getLogger(__name__)


class PressureField:
    """Discontinuous P_degree scalar field (one block of scalar coefficients per element)."""

    def __init__(self, mesh: Mesh, degree: int, coeffs):
        self.mesh = mesh
        self.degree = int(degree)
        self.scalar = ScalarBasis(self.degree)
        self.coeffs = np.asarray(coeffs, dtype=float).reshape(mesh.num_elements * self.scalar.dim)

    @property
    def local(self) -> np.ndarray:
        return self.coeffs.reshape(self.mesh.num_elements, self.scalar.dim)

    def values(self, ref_points: np.ndarray) -> np.ndarray:
        """(ne, nq)."""
        return self.local @ self.scalar.eval(ref_points).T

    def integral(self) -> float:
        """(p_h, 1)."""
        rule = triangle_rule(self.degree)
        return float(np.einsum('q,k,kq->', rule.weights, self.mesh.det_jacobians, self.values(rule.points)))


def recover_pressure(sigma: StressField) -> PressureField:
    """p_h = -1/2 tr sigma_h, element by element."""
    n = sigma.space.scalar.dim
    local = sigma.local
    coeffs = -0.5 * (local[:, :n] + local[:, 2 * n:])
    return PressureField(sigma.space.mesh, sigma.space.degree, coeffs)


def recover_velocity(sigma: StressField, data: ProblemData, quad_degree: Optional[int] = None) -> PiecewiseVectorField:
    """
    u_h = (kappa/mu)(div_h sigma_h + Q^{k-1} F).

    Raises:
        PostprocessError: for mu = 0, where the velocity is not determined by the stress
    """
    if data.mu == 0:
        raise PostprocessError("velocity recovery needs a positive viscosity (mu = 0)")
    space = sigma.space
    mesh = space.mesh
    degree = space.degree - 1
    rule = triangle_rule(quad_degree if quad_degree is not None else data.orders.data_degree(space.degree))
    samples = sigma.divergence(rule.points)
    if data.force is not None:
        x = mesh.to_physical(rule.points)
        samples = samples + data.kappa_force(x, mesh.kappa) / mesh.kappa[:, None, None]
    local = project_local(mesh, degree, samples, rule)
    local *= (mesh.kappa / data.mu)[:, None, None]
    return PiecewiseVectorField(mesh, degree, local.reshape(-1))


class BDMVelocityField(BDMField):
    """Divergence-free BDM velocity together with its Lagrange multiplier."""

    def __init__(self, space: BDMSpace, coeffs, multipliers: MultiplierSpace, multiplier_coeffs):
        super().__init__(space, coeffs)
        self.multipliers = multipliers
        self.multiplier = np.asarray(multiplier_coeffs, dtype=float)

    def divergence_coefficients(self) -> np.ndarray:
        """Coefficients of div u* in the L2-orthonormal multiplier basis."""
        return self.divergence_moments(self.multipliers)


def reconstruction_order(k: int) -> int:
    """BDM order used for the reconstruction of a degree-k stress."""
    return max(k - 1, 1)


def reconstruct_divfree(u_h: PiecewiseVectorField, k: int, mesh: Optional[Mesh] = None,
                        tol: float = DEFAULT_TOL, method: str = "schur") -> BDMVelocityField:
    """
    Solve the mixed problem for the divergence-free velocity u*.

    Args:
        u_h: recovered velocity
        k: stress degree; the pair is BDM_{max(k-1,1)} / P_{max(k-1,1)-1}
        mesh: defaults to u_h.mesh
        method: saddle solver, 'schur' or 'direct'
    """
    mesh = u_h.mesh if mesh is None else mesh
    order = reconstruction_order(k)
    space = BDMSpace(mesh, order)
    multipliers = MultiplierSpace(mesh, order - 1)

    rule = triangle_rule(min(order + u_h.degree, 20))
    phi = space.values(rule.points)
    load = np.einsum('q,k,kqd,kqid->ki', rule.weights, mesh.det_jacobians, u_h.values(rule.points), phi)
    f = np.zeros(space.ndofs)
    np.add.at(f, space.element_dofs, load)

    system = SaddleSystem(space.mass_matrix, space.divergence_matrix(multipliers), f)
    result = saddle_solve(system, tol=tol, method=method)
    field = BDMVelocityField(space, result.primal, multipliers, result.multiplier)
    logger.info(f"Divergence-free reconstruction: BDM_{order}, {space.ndofs} + {multipliers.ndofs} DoFs, "
                f"max |div coefficient| {np.max(np.abs(field.divergence_coefficients())):.2e}")
    return field
