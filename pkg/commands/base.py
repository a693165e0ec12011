"""
Base class for CLI commands.
All commands should inherit from this.

A command owns its log file under <data_dir>/logs and its outputs under
<data_dir>/results. Log records of the `brinkman` library are routed
through the same timestamped log() as the command's own messages.
"""
import logging
import os
import sys
from abc import ABC, abstractmethod
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from brinkman.config import RunConfig
from brinkman.dg_core import QuadratureOrders
from brinkman.errors import BrinkmanError, ConfigError, MeshError, SolverError, StudyError
from brinkman.mesh import (BOUNDARY_LAYOUTS, MESH_FAMILIES, Mesh, assign_subdomains, barycentric_trisect,
                           classify_boundary, read_mesh, set_permeability)
from brinkman.scenarios import inclusions_kappa
from brinkman.verification import CASES, StudyConfig, heterogeneous_case


# Load environment variables
load_dotenv()

# Get the project root directory
PROJECT_ROOT = Path(__file__).parent.parent

# Log lines older than this many days are dropped on start-up
LOG_RETENTION_DAYS = 30
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

# Exit statuses
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_MESH = 3
EXIT_SOLVER = 4
EXIT_IO = 5


def exit_status(error: BaseException) -> int:
    """Map an exception raised by a command to the process exit status."""
    if isinstance(error, StudyError):
        error = error.cause
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, MeshError):
        return EXIT_MESH
    if isinstance(error, SolverError):
        return EXIT_SOLVER
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_FAILED


def _is_stale(line: str, cutoff: datetime) -> bool:
    """True for a '[timestamp] ...' line older than cutoff; unstamped lines are kept."""
    if not (line.startswith('[') and ']' in line):
        return False
    try:
        return datetime.strptime(line[1:line.index(']')], TIMESTAMP_FORMAT) < cutoff
    except ValueError:
        return False


class _CommandLogHandler(logging.Handler):
    """Forwards library log records to a command's log()."""

    def __init__(self, command: "BrinkmanCommand", level=logging.INFO):
        super().__init__(level)
        self.command = command

    def emit(self, record):
        try:
            message = record.getMessage()
            if record.levelno >= logging.WARNING:
                message = f"{record.levelname}: {message}"
            self.command.log(message)
        except Exception:
            self.handleError(record)


class BrinkmanCommand(ABC):
    """
    Abstract base class for brinkman commands.

    Subclasses must implement:
        - command_name: str property
        - execute() -> int  (exit status, 0 on success)
    """

    def __init__(self, config: RunConfig, quiet: bool = False):
        """
        Args:
            config: validated run configuration
            quiet: If True, only write to the log file
        """
        self.config = config
        self.quiet = quiet
        data_dir = Path(config.data_dir)
        self.data_dir = data_dir if data_dir.is_absolute() else PROJECT_ROOT / data_dir
        self._ensure_directories()
        self._rotate_logs()
        self._handler = None

    @property
    def logs_dir(self) -> Path:
        return self.data_dir / "logs"

    @property
    def results_dir(self) -> Path:
        return self.data_dir / "results"

    @property
    def log_file(self) -> Path:
        return self.logs_dir / f"{self.command_name}.log"

    def output_path(self, default_name: str) -> Path:
        """config.output if set, else results/<default_name>."""
        if self.config.output:
            path = Path(self.config.output)
            path.parent.mkdir(parents=True, exist_ok=True)
            return path
        return self.results_dir / default_name

    def _ensure_directories(self):
        """Ensure data directories exist."""
        self.logs_dir.mkdir(parents=True, exist_ok=True)
        self.results_dir.mkdir(parents=True, exist_ok=True)

    def _rotate_logs(self):
        """Drop log lines stamped more than LOG_RETENTION_DAYS ago."""
        if not self.log_file.exists():
            return

        cutoff = datetime.now() - timedelta(days=LOG_RETENTION_DAYS)
        try:
            lines = self.log_file.read_text().splitlines(keepends=True)
            self.log_file.write_text("".join(line for line in lines if not _is_stale(line, cutoff)))
        except OSError:
            pass

    # --- Abstract members ---

    @property
    @abstractmethod
    def command_name(self) -> str:
        """Command key (e.g., 'solve')"""
        pass

    @abstractmethod
    def execute(self) -> int:
        """Do the work; return the exit status."""
        pass

    # --- Shared setup ---

    def build_mesh(self) -> Mesh:
        """Mesh from config.mesh with the configured boundary layout."""
        spec = self.config.mesh_spec()
        if spec[0] == "file":
            _, path, trisect = spec
            label = self.config.mesh
            mesh = read_mesh(path)
            if trisect:
                mesh = barycentric_trisect(mesh)
        else:
            family, n = spec
            label = f"{family}:{n}"
            mesh = MESH_FAMILIES[family](n)
        mesh = classify_boundary(mesh, BOUNDARY_LAYOUTS[self.config.boundary])
        self.log(f"Mesh {label}: {mesh.num_elements} elements, {mesh.num_faces} faces, "
                 f"h={mesh.h:.4f}, theta={mesh.theta}")
        return mesh

    def apply_kappa(self, mesh: Mesh) -> Mesh:
        """Per-element permeability from config.kappa."""
        kind, value = self.config.kappa_spec()
        if kind == "constant":
            return set_permeability(mesh, value)
        if kind == "contrast":
            mesh = assign_subdomains(mesh, lambda c: (c[..., 0] >= 0.5).astype(np.int64))
            return set_permeability(mesh, {0: 1.0, 1: 1.0 / value})
        if kind == "file":
            try:
                values = np.loadtxt(value, dtype=float, ndmin=1)
            except ValueError as e:
                raise ConfigError(f"{value}: unreadable permeability file ({e})")
            return set_permeability(mesh, values)
        return set_permeability(mesh, inclusions_kappa(seed=value))

    def manufactured_problem(self, mesh: Mesh, orders: QuadratureOrders):
        """
        Exact-solution case from config.case on `mesh`.

        Returns:
            (mesh with permeability, ManufacturedCase, ProblemData)
        """
        config = self.config
        kind, value = config.kappa_spec()
        if kind == "contrast":
            case = heterogeneous_case(value, config.mu)
        elif config.case == "heterogeneous":
            raise ConfigError("the heterogeneous case needs --kappa contrast:<c>")
        else:
            case = CASES[config.case](StudyConfig(case=config.case, mu=config.mu))

        mesh = case.prepare(mesh)
        if case.subdomains is None:
            # The exact solution holds for any piecewise constant kappa.
            mesh = self.apply_kappa(mesh)
        case = case.normalised_for(mesh)
        return mesh, case, case.problem_data(config.k, config.a_star, orders)

    # --- Core functionality ---

    def log(self, message: str):
        """Write a timestamped line to the command log, echoing it unless quiet."""
        log_line = f"[{datetime.now().strftime(TIMESTAMP_FORMAT)}] {message}"

        if not self.quiet:
            print(log_line)

        with self.log_file.open("a") as f:
            f.write(log_line + "\n")

    def _attach_library_logs(self):
        self._handler = _CommandLogHandler(self)
        library = logging.getLogger("brinkman")
        library.addHandler(self._handler)
        if library.level == logging.NOTSET or library.level > logging.INFO:
            library.setLevel(logging.INFO)

    def _detach_library_logs(self):
        if self._handler is not None:
            logging.getLogger("brinkman").removeHandler(self._handler)
            self._handler = None

    def run(self) -> int:
        """Main execution logic; returns the exit status."""
        self._attach_library_logs()
        self.log(f"{self.command_name} started (pid {os.getpid()})")
        try:
            status = self.execute()
            self.log(f"{self.command_name} finished with status {status}")
            return status
        except (BrinkmanError, OSError) as e:
            status = exit_status(e)
            self.log(f"ERROR: {e}")
            if self.quiet:
                print(f"Error: {e}", file=sys.stderr)
            return status
        finally:
            self._detach_library_logs()
