"""
Pure-stress discontinuous Galerkin solver for the Brinkman equations in 2D.

The stress sigma = 2 mu eps(u) - p I is the only unknown; pressure, velocity
and an exactly divergence-free H(div) velocity are recovered afterwards.
"""
from .assembly import LinearSystem, ProblemData, assemble, consistency_residual
from .bdm import BDMElement, BDMField, BDMSpace, bdm_interpolate
from .dg_core import PiecewiseVectorField, StressField, StressSpace, face_average_kdiv, face_jump, l2_project_vector
from .errors import BrinkmanError
from .linalg import SaddleSystem, SparseSymmetric, cg_solve, direct_solve, saddle_solve
from .mesh import (ALL_DIRICHLET, MIXED_BOUNDARY, BoundarySpec, Mesh, barycentric_trisect, classify_boundary,
                   crisscross_grid, diagonal_grid, read_mesh, set_permeability, write_mesh)
from .pipeline import Solution, solve_problem
from .postprocess import BDMVelocityField, PressureField, reconstruct_divfree, recover_pressure, recover_velocity
from .quadrature import QuadratureRule, edge_rule, triangle_rule
from .ref_elements import ScalarBasis, SymTensorBasis, scalar_basis, sym_tensor_basis
from .verification import (ErrorTable, ManufacturedCase, StudyConfig, convergence_study, error_norms,
                           heterogeneous_case, smooth_case, polynomial_case)


__version__ = "1.0.0"
