"""
Solve a Brinkman problem end to end: assemble, solve for the stress, and
post-process pressure and velocity.
"""
import logging
import time
from dataclasses import dataclass
from typing import Optional

from .assembly import LinearSystem, ProblemData, assemble
from .dg_core import PiecewiseVectorField, StressField, StressSpace
from .errors import ConfigError
from .linalg import DEFAULT_TOL, cg_solve, direct_solve
from .mesh import Mesh
from .postprocess import BDMVelocityField, PressureField, reconstruct_divfree, recover_pressure, recover_velocity


logger = logging.getLogger(__name__)

SOLVERS = ("cg", "direct")


@dataclass
class Solution:
    """Discrete stress and everything recovered from it."""
    system: LinearSystem
    sigma: StressField
    pressure: PressureField
    velocity: Optional[PiecewiseVectorField] = None
    reconstruction: Optional[BDMVelocityField] = None
    iterations: int = 0
    seconds: float = 0.0

    @property
    def mesh(self) -> Mesh:
        return self.sigma.space.mesh


def solve_system(system: LinearSystem, solver: str = "cg", tol: float = DEFAULT_TOL,
                 preconditioner: str = "block-jacobi") -> tuple:
    """Returns (coefficients, iterations)."""
    if solver == "cg":
        result = cg_solve(system.operator, system.rhs, tol=tol, preconditioner=preconditioner)
        logger.info(f"CG converged in {result.iterations} iterations "
                    f"(relative residual {result.residual:.2e})")
        return result.x, result.iterations
    if solver == "direct":
        return direct_solve(system.operator, system.rhs), 0
    raise ConfigError(f"Unknown solver '{solver}' (choose from {', '.join(SOLVERS)})")


def solve_problem(mesh: Mesh, data: ProblemData, solver: str = "cg", tol: float = DEFAULT_TOL,
                  preconditioner: str = "block-jacobi", reconstruct: bool = True,
                  saddle_method: str = "schur", threads: int = 1) -> Solution:
    """
    Args:
        mesh: classified mesh with permeability set
        data: problem data (data.degree selects the stress space)
        reconstruct: also compute the divergence-free velocity
    """
    start = time.perf_counter()
    space = StressSpace(mesh, data.degree)
    system = assemble(space, data, threads=threads)
    coeffs, iterations = solve_system(system, solver, tol, preconditioner)
    sigma = StressField(system.space, coeffs)
    solution = Solution(system, sigma, recover_pressure(sigma), iterations=iterations)

    if data.mu > 0:
        solution.velocity = recover_velocity(sigma, data)
        if reconstruct:
            solution.reconstruction = reconstruct_divfree(solution.velocity, data.degree, tol=tol,
                                                          method=saddle_method)
    else:
        logger.info("mu = 0: velocity is not recoverable from the stress, skipping")

    solution.seconds = time.perf_counter() - start
    logger.info(f"Solved {space.ndofs} DoFs in {solution.seconds:.2f}s "
                f"(|(tr sigma_h, 1)| = {abs(sigma.trace_integral()):.2e})")
    return solution
