"""
Run configuration.

Precedence, lowest first: built-in defaults, environment (.env loaded with
python-dotenv), a YAML file, then command-line flags. Values are validated
before any mesh or matrix is allocated.
"""
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import yaml
from dotenv import load_dotenv

from .errors import ConfigError
from .linalg import PRECONDITIONERS
from .mesh import BOUNDARY_LAYOUTS, MESH_FAMILIES
from .pipeline import SOLVERS
from .ref_elements import MAX_DEGREE
from .verification import CASES, StudyConfig


COMMAND_NAMES = ("solve", "convergence", "verify")
SOLVE_CASES = tuple(CASES) + ("channel", "zero")
KAPPA_KINDS = ("constant", "contrast", "file", "inclusions")

ENV_DATA_DIR = "BRINKMAN_DATA_DIR"
ENV_THREADS = "BRINKMAN_THREADS"


@dataclass
class RunConfig:
    """
    Settings of one CLI run. Bare defaults reproduce the first row of the
    k=1 diagonal-mesh study.
    """
    command: str = "convergence"
    mesh: Optional[str] = None
    family: str = "diagonal"
    levels: int = 1
    start: int = 2
    k: int = 1
    mu: float = 1e-3
    kappa: str = "constant:1"
    a_star: float = 10.0
    boundary: str = "mixed"
    case: str = "smooth"
    solver: str = "cg"
    preconditioner: str = "block-jacobi"
    tol: float = 1e-12
    quad_bump: int = 0
    reconstruct: bool = True
    output: Optional[str] = None
    data_dir: str = "data"
    threads: int = 1

    # --- Parsing helpers ---

    def mesh_spec(self) -> tuple:
        """
        ('diagonal'|'crisscross'|'trisect', n) or ('file', path, trisect).

        Without an explicit mesh the study family and start size are used.
        """
        if not self.mesh:
            return (self.family, self.start)
        parts = self.mesh.split(":")
        if parts[0] == "file":
            if len(parts) < 2 or not parts[1]:
                raise ConfigError("mesh file spec needs a path: file:<path>[:trisect]")
            trisect = len(parts) > 2 and parts[2] == "trisect"
            if len(parts) > 2 and not trisect:
                raise ConfigError(f"unknown mesh file option '{parts[2]}'")
            return ("file", parts[1], trisect)
        if parts[0] not in MESH_FAMILIES or len(parts) != 2:
            raise ConfigError(f"mesh must be <family>:<n> or file:<path>, got '{self.mesh}'")
        try:
            n = int(parts[1])
        except ValueError:
            raise ConfigError(f"mesh size must be an integer, got '{parts[1]}'")
        if n < 1:
            raise ConfigError(f"mesh size must be positive, got {n}")
        return (parts[0], n)

    def kappa_spec(self) -> tuple:
        kind, _, value = self.kappa.partition(":")
        if kind not in KAPPA_KINDS:
            raise ConfigError(f"kappa must be one of {', '.join(KAPPA_KINDS)}, got '{self.kappa}'")
        if kind == "file":
            if not value:
                raise ConfigError("kappa file spec needs a path: file:<path>")
            return (kind, value)
        if kind == "inclusions":
            try:
                return (kind, int(value) if value else 0)
            except ValueError:
                raise ConfigError(f"inclusions seed must be an integer, got '{value}'")
        try:
            number = float(value) if value else 1.0
        except ValueError:
            raise ConfigError(f"kappa value must be a number, got '{value}'")
        if kind == "constant" and not number > 0:
            raise ConfigError("constant kappa must be positive")
        if kind == "contrast" and not number >= 1:
            raise ConfigError("kappa contrast must be >= 1")
        return (kind, number)

    def validate(self) -> "RunConfig":
        if self.command not in COMMAND_NAMES:
            raise ConfigError(f"Unknown command '{self.command}'")
        if not isinstance(self.k, int) or not 1 <= self.k <= MAX_DEGREE:
            raise ConfigError(f"k must be an integer in 1..{MAX_DEGREE}, got {self.k!r}")
        if not self.mu >= 0:
            raise ConfigError(f"mu must be non-negative, got {self.mu}")
        if not self.a_star > 0:
            raise ConfigError(f"a* must be positive, got {self.a_star}")
        if not 0 < self.tol < 1:
            raise ConfigError(f"tol must lie in (0, 1), got {self.tol}")
        if self.family not in MESH_FAMILIES:
            raise ConfigError(f"Unknown mesh family '{self.family}'")
        if self.boundary not in BOUNDARY_LAYOUTS:
            raise ConfigError(f"Unknown boundary layout '{self.boundary}' "
                              f"(choose from {', '.join(BOUNDARY_LAYOUTS)})")
        if self.case not in SOLVE_CASES:
            raise ConfigError(f"Unknown case '{self.case}' (choose from {', '.join(SOLVE_CASES)})")
        if self.command != "solve" and self.case not in CASES:
            raise ConfigError(f"case '{self.case}' has no exact solution; use it with 'solve'")
        if self.solver not in SOLVERS:
            raise ConfigError(f"Unknown solver '{self.solver}'")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigError(f"Unknown preconditioner '{self.preconditioner}'")
        if self.levels < 1 or self.start < 1:
            raise ConfigError("levels and start must be positive")
        if self.quad_bump < 0:
            raise ConfigError("quad_bump must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        self.mesh_spec()
        self.kappa_spec()
        return self

    def study(self) -> StudyConfig:
        """Refinement study starting from the configured mesh family and size."""
        spec = self.mesh_spec()
        if spec[0] == "file":
            raise ConfigError("a mesh file cannot be refined into a study; use it with 'solve' or 'verify'")
        family, start = spec
        kind, value = self.kappa_spec()
        case = self.case
        contrast, kappa = 1.0, 1.0
        if kind == "contrast":
            case, contrast = "heterogeneous", value
        elif kind == "constant":
            kappa = value
        else:
            raise ConfigError(f"kappa '{self.kappa}' cannot be refined with the mesh; use it with 'solve'")
        return StudyConfig(family=family, levels=self.levels, start=start, degree=self.k,
                           mu=self.mu, case=case, contrast=contrast, kappa=kappa, a_star=self.a_star,
                           boundary=self.boundary, solver=self.solver, tol=self.tol,
                           reconstruct=self.reconstruct, quad_bump=self.quad_bump, threads=self.threads)

    def as_dict(self) -> dict:
        return asdict(self)


def _coerce(name: str, value):
    """Convert a raw env/YAML value to the type of the RunConfig field."""
    target = {f.name: f.type for f in fields(RunConfig)}[name]
    if value is None:
        return None
    try:
        if target in (bool, "bool"):
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if target in (int, "int"):
            return int(value)
        if target in (float, "float"):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for '{name}': {value!r}")


def from_environment(base: Optional[RunConfig] = None) -> RunConfig:
    load_dotenv()
    config = base or RunConfig()
    if os.getenv(ENV_DATA_DIR):
        config.data_dir = os.getenv(ENV_DATA_DIR)
    if os.getenv(ENV_THREADS):
        config.threads = _coerce("threads", os.getenv(ENV_THREADS))
    return config


def from_yaml(path, base: Optional[RunConfig] = None) -> RunConfig:
    """Overlay keys of a YAML mapping onto `base` (unknown keys are an error)."""
    config = base or RunConfig()
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML ({e})")
    if raw is None:
        return config
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    for key, value in raw.items():
        setattr(config, key, _coerce(key, value))
    return config


def load_config(overrides: Optional[dict] = None, config_file=None) -> RunConfig:
    """
    Build a validated RunConfig.

    Args:
        overrides: command-line values; None entries are ignored
        config_file: optional YAML file
    """
    config = from_environment(RunConfig())
    if config_file is not None:
        config = from_yaml(config_file, config)
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, _coerce(key, value))
    return config.validate()
