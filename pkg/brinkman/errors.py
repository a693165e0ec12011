"""
Exception hierarchy for the brinkman package.

The command layer maps each class to an exit status (see commands/base.py),
so raise the most specific class that fits.
"""


class BrinkmanError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(BrinkmanError, ValueError):
    """Invalid run configuration or problem parameters."""


class MeshError(BrinkmanError, ValueError):
    """Invalid mesh, mesh file, boundary layout or permeability assignment."""


class QuadratureError(BrinkmanError, ValueError):
    """Requested quadrature exactness is not available."""


class AssemblyError(BrinkmanError, ValueError):
    """The discrete system cannot be assembled with the given inputs."""


class SolverError(BrinkmanError):
    """A linear solve failed."""


class ConvergenceError(SolverError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class PostprocessError(BrinkmanError):
    """A post-processing step is undefined for the given data."""


class StudyError(BrinkmanError):
    """A convergence study failed on one of its refinement levels."""

    def __init__(self, level: int, cause: Exception):
        super().__init__(f"level {level}: {cause}")
        self.level = level
        self.cause = cause
