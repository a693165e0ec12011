"""
Single solve on one mesh, written to a VTK file.
"""
import math

from brinkman.dg_core import QuadratureOrders
from brinkman.pipeline import solve_problem
from brinkman.scenarios import channel_problem, zero_problem
from brinkman.verification import error_norms
from brinkman.vtk import write_solution

from .base import BrinkmanCommand, EXIT_OK


class SolveCommand(BrinkmanCommand):
    """Solve one problem and export sigma_h, p_h, u_h, u* and kappa."""

    @property
    def command_name(self) -> str:
        return "solve"

    def execute(self) -> int:
        config = self.config
        orders = QuadratureOrders(bump=config.quad_bump)
        mesh = self.build_mesh()
        case = None

        if config.case == "channel":
            if config.boundary != "channel":
                self.log(f"channel case uses the channel boundary layout (ignoring '{config.boundary}')")
            mesh, data = channel_problem(self.apply_kappa(mesh), config.k, config.mu,
                                         a_star=config.a_star, orders=orders)
        elif config.case == "zero":
            mesh = self.apply_kappa(mesh)
            data = zero_problem(config.k, config.mu, config.a_star)
        else:
            mesh, case, data = self.manufactured_problem(mesh, orders)

        solution = solve_problem(mesh, data, solver=config.solver, tol=config.tol,
                                 preconditioner=config.preconditioner, reconstruct=config.reconstruct,
                                 threads=config.threads)
        self.log(f"{config.case}: k={config.k}, {solution.system.space.ndofs} DoFs, "
                 f"{solution.iterations} iterations, {solution.seconds:.2f}s")

        if case is not None:
            record = error_norms(solution.sigma, solution.velocity, solution.reconstruction,
                                 solution.pressure, case, orders)
            summary = [f"e_norm={record.e_norm:.3e}", f"e_a={record.e_a:.3e}",
                       f"e_div={record.e_div:.3e}", f"e_jump={record.e_jump:.3e}"]
            for name in ("e0_u", "e0_ustar", "e0_p"):
                value = getattr(record, name)
                if not math.isnan(value):
                    summary.append(f"{name}={value:.3e}")
            self.log("Errors: " + " ".join(summary))

        path = write_solution(self.output_path(f"solve_{config.case}_k{config.k}.vtk"), solution)
        self.log(f"Saved {path}")
        return EXIT_OK
