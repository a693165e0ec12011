"""
Self-checks of the discretisation on one mesh: consistency with the exact
solution, symmetry and definiteness of the system, the trace constraint,
solver agreement and the divergence-free reconstruction.
"""
import math
from dataclasses import dataclass

import numpy as np

from brinkman.assembly import assemble, consistency_residual
from brinkman.bdm import commuting_defect
from brinkman.dg_core import QuadratureOrders, StressField, StressSpace
from brinkman.linalg import dense_min_eigenvalue
from brinkman.mesh import Mesh
from brinkman.pipeline import solve_system
from brinkman.postprocess import reconstruct_divfree, reconstruction_order, recover_velocity
from brinkman.quadrature import MAX_DEGREE, triangle_rule

from .base import BrinkmanCommand, EXIT_FAILED, EXIT_OK


# Thresholds
POLYNOMIAL_CONSISTENCY_TOL = 1e-11
SMOOTH_CONSISTENCY_TOL = 1e-8
SYMMETRY_TOL = 1e-12
TRACE_TOL = 1e-10
SOLVER_AGREEMENT_TOL = 1e-8
COMMUTING_TOL = 1e-10
DIVERGENCE_TOL = 1e-8

# Largest system densified for the eigenvalue check
MAX_DENSE_DOFS = 2500


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if math.isnan(self.value):
            return f"{status}  {self.name}: {self.note}"
        detail = f"{self.value:.3e} (limit {self.threshold:.1e})"
        return f"{status}  {self.name}: {detail}" + (f" {self.note}" if self.note else "")


def _below(name: str, value: float, threshold: float, note: str = "") -> CheckResult:
    return CheckResult(name, value, threshold, bool(value < threshold), note)


def _skipped(name: str, reason: str) -> CheckResult:
    return CheckResult(name, math.nan, math.nan, True, f"skipped, {reason}")


def _cubic_field(x):
    X, Y = x[..., 0], x[..., 1]
    return np.stack([X ** 3 + Y ** 2, X * Y ** 2], axis=-1)


def _cubic_divergence(x):
    X, Y = x[..., 0], x[..., 1]
    return 3.0 * X ** 2 + 2.0 * X * Y


def check_mesh(mesh: Mesh) -> CheckResult:
    """Euler characteristic 1 (simply connected), positive areas and unit normals."""
    normals = np.linalg.norm(mesh.face_normals, axis=1)
    ok = (mesh.euler_characteristic == 1 and bool(np.all(mesh.areas > 0))
          and bool(np.allclose(normals, 1.0, atol=1e-13)))
    return CheckResult("mesh", math.nan, math.nan, ok,
                       f"chi={mesh.euler_characteristic}, min area {mesh.areas.min():.2e}, "
                       f"shape regularity {mesh.shape_regularity:.2f}")


def check_quadrature(degree: int) -> CheckResult:
    """Monomials x^a y^b, a + b <= degree, against a! b! / (a + b + 2)!."""
    rule = triangle_rule(degree)
    worst = 0.0
    for total in range(degree + 1):
        for a in range(total + 1):
            b = total - a
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            approx = rule.integrate(rule.points[:, 0] ** a * rule.points[:, 1] ** b)
            worst = max(worst, abs(approx - exact) / exact)
    return _below(f"quadrature degree {degree}", worst, 1e-10)


class VerifyCommand(BrinkmanCommand):
    """Run the discretisation self-checks and print a PASS/FAIL summary."""

    @property
    def command_name(self) -> str:
        return "verify"

    def run_checks(self) -> list:
        config = self.config
        orders = QuadratureOrders(bump=config.quad_bump)
        mesh = self.build_mesh()
        mesh, case, data = self.manufactured_problem(mesh, orders)
        results = [check_mesh(mesh), check_quadrature(orders.form_degree(config.k)),
                   check_quadrature(orders.data_degree(config.k))]

        space = StressSpace(mesh, config.k)
        # residual at the highest available quadrature degree
        converged = case.problem_data(config.k, config.a_star, QuadratureOrders(data=MAX_DEGREE))
        limit = POLYNOMIAL_CONSISTENCY_TOL if case.name.startswith("polynomial") else SMOOTH_CONSISTENCY_TOL
        results.append(_below("consistency", consistency_residual(space, converged, None, case), limit,
                              f"({case.name})"))

        system = assemble(space, data, threads=config.threads)
        operator = system.operator
        results.append(_below("symmetry", operator.asymmetry(), SYMMETRY_TOL))
        if operator.ndofs <= MAX_DENSE_DOFS:
            smallest = dense_min_eigenvalue(operator)
            results.append(CheckResult("positive definite", smallest, 0.0, smallest > 0,
                                       "(smallest eigenvalue)"))
        else:
            results.append(_skipped("positive definite", f"{operator.ndofs} DoFs"))

        x_cg, iterations = solve_system(system, "cg", config.tol, config.preconditioner)
        x_direct, _ = solve_system(system, "direct")
        agreement = np.linalg.norm(x_cg - x_direct) / max(np.linalg.norm(x_direct), 1e-300)
        results.append(_below("cg matches direct", agreement, max(SOLVER_AGREEMENT_TOL, 100 * config.tol),
                              f"({iterations} iterations)"))

        sigma = StressField(space, x_direct)
        if mesh.theta:
            scale = max(1.0, sigma.l2_norm())
            results.append(_below("trace constraint", abs(sigma.trace_integral()) / scale, TRACE_TOL))
        else:
            results.append(_skipped("trace constraint", "Neumann boundary present"))

        order = reconstruction_order(config.k)
        results.append(_below(f"commuting interpolant BDM_{order}",
                              commuting_defect(_cubic_field, _cubic_divergence, order, mesh),
                              COMMUTING_TOL))

        if data.mu > 0 and config.reconstruct:
            u_star = reconstruct_divfree(recover_velocity(sigma, data), config.k, tol=config.tol)
            worst = float(np.max(np.abs(u_star.divergence_coefficients())))
            scale = max(1.0, float(np.max(np.abs(u_star.coeffs))))
            results.append(_below("divergence-free reconstruction", worst / scale, DIVERGENCE_TOL))
        else:
            results.append(_skipped("divergence-free reconstruction", "mu = 0 or reconstruction disabled"))
        return results

    def execute(self) -> int:
        results = self.run_checks()
        for result in results:
            self.log(result.line())
        failed = [r.name for r in results if not r.passed]
        if failed:
            self.log(f"FAILED {len(failed)} of {len(results)} checks: {', '.join(failed)}")
            return EXIT_FAILED
        self.log(f"All {len(results)} checks passed")
        return EXIT_OK
