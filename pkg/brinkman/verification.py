"""
Manufactured solutions, DG error norms, convergence rates and error tables.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .assembly import DEFAULT_A_STAR, ProblemData
from .dg_core import PiecewiseVectorField, QuadratureOrders, StressField, face_quadrature, face_traces
from .errors import BrinkmanError, ConfigError, StudyError
from .linalg import DEFAULT_TOL
from .mesh import BOUNDARY_LAYOUTS, MESH_FAMILIES, Mesh, assign_subdomains, classify_boundary, set_permeability
from .pipeline import Solution, solve_problem
from .postprocess import BDMVelocityField, PressureField
from .quadrature import triangle_rule
from .ref_elements import deviatoric, trace


logger = logging.getLogger(__name__)

PI = np.pi


def _constant_kappa(points):
    return np.ones(points.shape[:-1])


@dataclass
class ManufacturedCase:
    """
    Exact Brinkman solution with all derived data.

    velocity_gradient(x)[..., i, j] = d u_i / d x_j. The stress is
    sigma = 2 mu eps(u) - p I, div sigma = mu lap u - grad p (div u = 0),
    and F = (mu / kappa) u - div sigma on each subdomain.
    """
    name: str
    mu: float
    velocity: Callable[[np.ndarray], np.ndarray]
    velocity_gradient: Callable[[np.ndarray], np.ndarray]
    velocity_laplacian: Callable[[np.ndarray], np.ndarray]
    pressure_fn: Callable[[np.ndarray], np.ndarray]
    pressure_gradient: Callable[[np.ndarray], np.ndarray]
    kappa: Callable[[np.ndarray], np.ndarray] = _constant_kappa
    subdomains: Optional[Callable[[np.ndarray], np.ndarray]] = None
    pressure_shift: float = 0.0

    def pressure(self, x: np.ndarray) -> np.ndarray:
        return self.pressure_fn(x) + self.pressure_shift

    def stress(self, x: np.ndarray) -> np.ndarray:
        g = self.velocity_gradient(x)
        eps = 0.5 * (g + np.swapaxes(g, -1, -2))
        return 2.0 * self.mu * eps - self.pressure(x)[..., None, None] * np.eye(2)

    def stress_divergence(self, x: np.ndarray) -> np.ndarray:
        return self.mu * self.velocity_laplacian(x) - self.pressure_gradient(x)

    def force(self, x: np.ndarray, kappa: np.ndarray) -> np.ndarray:
        return (self.mu / kappa)[..., None] * self.velocity(x) - self.stress_divergence(x)

    def traction(self, x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        return np.einsum('...ab,...b->...a', self.stress(x), normals)

    def prepare(self, mesh: Mesh) -> Mesh:
        """Assign subdomains (checking alignment) and per-element permeability."""
        if self.subdomains is not None:
            mesh = assign_subdomains(mesh, self.subdomains)
        return set_permeability(mesh, lambda c: self.kappa(c))

    def problem_data(self, degree: int, a_star: float = DEFAULT_A_STAR,
                     orders: Optional[QuadratureOrders] = None) -> ProblemData:
        return ProblemData(mu=self.mu, force=self.force, dirichlet=self.velocity, neumann=self.traction,
                           a_star=a_star, degree=degree, orders=orders or QuadratureOrders())

    def normalised_for(self, mesh: Mesh) -> "ManufacturedCase":
        """With theta = 1 the discrete pressure has zero mean; shift p to match."""
        if not mesh.theta:
            return self
        rule = triangle_rule(16)
        x = mesh.to_physical(rule.points)
        area = mesh.det_jacobians.sum() / 2.0
        mean = np.einsum('q,k,kq->', rule.weights, mesh.det_jacobians, self.pressure_fn(x)) / area
        return replace(self, pressure_shift=-float(mean))


# --- Cases ---

def smooth_case(mu: float = 1e-3) -> ManufacturedCase:
    """u = (cos(pi x) sin(pi y), -sin(pi x) cos(pi y)), p = sin(pi x y), kappa = 1."""
    def velocity(x):
        X, Y = x[..., 0], x[..., 1]
        return np.stack([np.cos(PI * X) * np.sin(PI * Y), -np.sin(PI * X) * np.cos(PI * Y)], axis=-1)

    def gradient(x):
        X, Y = x[..., 0], x[..., 1]
        ss = np.sin(PI * X) * np.sin(PI * Y)
        cc = np.cos(PI * X) * np.cos(PI * Y)
        return PI * np.stack([np.stack([-ss, cc], axis=-1), np.stack([-cc, ss], axis=-1)], axis=-2)

    def laplacian(x):
        return -2.0 * PI ** 2 * velocity(x)

    def pressure(x):
        return np.sin(PI * x[..., 0] * x[..., 1])

    def pressure_gradient(x):
        X, Y = x[..., 0], x[..., 1]
        c = PI * np.cos(PI * X * Y)
        return np.stack([c * Y, c * X], axis=-1)

    return ManufacturedCase("smooth", mu, velocity, gradient, laplacian, pressure, pressure_gradient)


def heterogeneous_case(contrast: float, mu: float = 1e-3) -> ManufacturedCase:
    """
    The solution of smooth_case on the split x < 1/2 (kappa = 1) and
    x >= 1/2 (kappa = 1/contrast), with F defined per subdomain.
    """
    if not np.isfinite(contrast) or contrast < 1:
        raise ConfigError(f"permeability contrast must be >= 1, got {contrast}")
    base = smooth_case(mu)

    def subdomains(points):
        return (points[..., 0] >= 0.5).astype(np.int64)

    def kappa(points):
        return np.where(points[..., 0] >= 0.5, 1.0 / contrast, 1.0)

    return replace(base, name=f"heterogeneous-{contrast:g}", kappa=kappa, subdomains=subdomains)


def polynomial_case(degree: int = 1, mu: float = 1.0) -> ManufacturedCase:
    """
    Polynomial solutions: degree 1 has linear u, constant p and constant
    sigma; degree 2 has quadratic u, linear p and linear sigma.
    """
    if degree not in (1, 2):
        raise ConfigError(f"polynomial case degree must be 1 or 2, got {degree}")
    q = 1.0 if degree == 2 else 0.0

    def velocity(x):
        X, Y = x[..., 0], x[..., 1]
        return np.stack([q * X ** 2 + X + 2.0 * Y + 0.5, -2.0 * q * X * Y - 3.0 * X - Y - 0.3], axis=-1)

    def gradient(x):
        X, Y = x[..., 0], x[..., 1]
        one = np.ones_like(X)
        return np.stack([
            np.stack([2.0 * q * X + 1.0, 2.0 * one], axis=-1),
            np.stack([-2.0 * q * Y - 3.0, -2.0 * q * X - 1.0], axis=-1),
        ], axis=-2)

    def laplacian(x):
        out = np.zeros(x.shape)
        out[..., 0] = 2.0 * q
        return out

    def pressure(x):
        return 0.7 + q * (x[..., 0] - 0.5 * x[..., 1])

    def pressure_gradient(x):
        out = np.zeros(x.shape)
        out[..., 0] = q
        out[..., 1] = -0.5 * q
        return out

    return ManufacturedCase(f"polynomial-{degree}", mu, velocity, gradient, laplacian, pressure, pressure_gradient)


# --- Error norms ---

@dataclass
class ErrorRecord:
    """Errors of one refinement level; NaN marks a field that was not computed."""
    level: int
    dofs: int
    h: float
    e_norm: float
    e_a: float
    e_div: float
    e_jump: float
    e0_u: float = math.nan
    e0_ustar: float = math.nan
    e0_p: float = math.nan


ERROR_COLUMNS = ("e_norm", "e_a", "e_div", "e_jump", "e0_u", "e0_ustar", "e0_p")


def _stress_errors(sigma: StressField, case: ManufacturedCase, degree: int):
    space = sigma.space
    mesh = space.mesh
    rule = triangle_rule(degree)
    x = mesh.to_physical(rule.points)
    e = case.stress(x) - sigma.values(rule.points)
    ediv = case.stress_divergence(x) - sigma.divergence(rule.points)
    w = rule.weights[None, :] * mesh.det_jacobians[:, None]
    dev = deviatoric(e)
    e_a2 = 0.5 * np.sum(w * np.einsum('kqab,kqab->kq', dev, dev))
    if mesh.theta:
        e_a2 += np.sum(w * trace(e)) ** 2
    e_div2 = np.sum(w * mesh.kappa[:, None] * np.einsum('kqa,kqa->kq', ediv, ediv))

    e_jump2 = 0.0
    faces = mesh.dg_faces
    if len(faces):
        fq = face_quadrature(mesh, faces, min(degree, 20))
        jump_h, _ = face_traces(sigma, fq)
        s = case.stress(fq.points)
        jump = np.zeros_like(fq.points)
        for side in (0, 1):
            present = (fq.elements[:, side] >= 0)[:, None, None]
            jump += present * np.einsum('fqab,fb->fqa', s, fq.side_normals(side))
        d = jump - jump_h
        weight = fq.gamma_inverse / fq.lengths
        e_jump2 = np.sum(fq.weights * weight[:, None] * np.einsum('fqa,fqa->fq', d, d))
    return math.sqrt(max(e_a2, 0.0)), math.sqrt(e_div2), math.sqrt(e_jump2)


def _l2_error(values: np.ndarray, exact: np.ndarray, mesh: Mesh, rule) -> float:
    d = (exact - values).reshape(values.shape[0], values.shape[1], -1)
    return math.sqrt(np.einsum('q,k,kqc,kqc->', rule.weights, mesh.det_jacobians, d, d))


def error_norms(sigma: StressField, u_h: Optional[PiecewiseVectorField], u_star: Optional[BDMVelocityField],
                p_h: Optional[PressureField], case: ManufacturedCase,
                orders: Optional[QuadratureOrders] = None, level: int = 0) -> ErrorRecord:
    """
    DG and L2 errors against a manufactured case.

    e_norm^2 = e_a^2 + e_div^2 + e_jump^2 with e_a^2 = a(e, e) (theta term
    included), e_div = ||kappa^{1/2} div_h e||, e_jump = ||gamma^{-1/2} h_F^{-1/2} [[e]]||
    over F_h*; on Neumann faces [[e]] = G_N - sigma_h n.
    """
    orders = orders or QuadratureOrders()
    mesh = sigma.space.mesh
    degree = orders.data_degree(sigma.space.degree)
    e_a, e_div, e_jump = _stress_errors(sigma, case, degree)

    rule = triangle_rule(degree)
    x = mesh.to_physical(rule.points)
    record = ErrorRecord(level=level, dofs=sigma.space.ndofs, h=mesh.h,
                         e_norm=math.sqrt(e_a ** 2 + e_div ** 2 + e_jump ** 2),
                         e_a=e_a, e_div=e_div, e_jump=e_jump)
    if u_h is not None:
        record.e0_u = _l2_error(u_h.values(rule.points), case.velocity(x), mesh, rule)
    if u_star is not None:
        record.e0_ustar = _l2_error(u_star.values(rule.points), case.velocity(x), mesh, rule)
    if p_h is not None:
        record.e0_p = _l2_error(p_h.values(rule.points), case.pressure(x), mesh, rule)
    return record


def convergence_rate(e: float, e_next: float, h: float, h_next: float) -> float:
    """r = log(e / e~) / log(h / h~)."""
    if not (e > 0 and e_next > 0) or h == h_next:
        return math.nan
    return math.log(e / e_next) / math.log(h / h_next)


# --- Tables ---

class ErrorTable:
    """Per-level errors with rates between consecutive rows."""

    def __init__(self, rows: Optional[List[ErrorRecord]] = None, title: str = ""):
        self.rows = list(rows or [])
        self.title = title

    def append(self, row: ErrorRecord):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def rates(self, name: str) -> List[float]:
        """Rates for one error column; the first entry is NaN."""
        out = [math.nan]
        for prev, cur in zip(self.rows[:-1], self.rows[1:]):
            out.append(convergence_rate(getattr(prev, name), getattr(cur, name), prev.h, cur.h))
        return out

    def final_rate(self, name: str) -> float:
        return self.rates(name)[-1]

    def header(self) -> List[str]:
        cols = ["level", "dof", "h"]
        for name in ERROR_COLUMNS:
            cols += [name, "rate"]
        return cols

    def _records(self, fmt_err, fmt_rate, fmt_h, missing_rate):
        rates = {name: self.rates(name) for name in ERROR_COLUMNS}
        for i, row in enumerate(self.rows):
            cells = [str(row.level), str(row.dofs), fmt_h(row.h)]
            for name in ERROR_COLUMNS:
                value = getattr(row, name)
                r = rates[name][i]
                cells.append("" if math.isnan(value) else fmt_err(value))
                cells.append(missing_rate if math.isnan(r) else fmt_rate(r))
            yield cells

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for cells in self._records(lambda v: f"{v:.6e}", lambda r: f"{r:.4f}", lambda h: f"{h:.6f}", ""):
            writer.writerow(cells)
        return buf.getvalue()

    def to_markdown(self) -> str:
        head = self.header()
        lines = []
        if self.title:
            lines += [f"### {self.title}", ""]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "|".join("---" for _ in head) + "|")
        for cells in self._records(lambda v: f"{v:.2e}", lambda r: f"{r:.2f}", lambda h: f"{h:.3f}", "*"):
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def write(self, csv_path, markdown_path=None):
        Path(csv_path).write_text(self.to_csv())
        if markdown_path is not None:
            Path(markdown_path).write_text(self.to_markdown())


# --- Convergence studies ---

CASES = {
    "smooth": lambda cfg: smooth_case(cfg.mu),
    "heterogeneous": lambda cfg: heterogeneous_case(cfg.contrast, cfg.mu),
    "polynomial": lambda cfg: polynomial_case(1, cfg.mu),
    "polynomial2": lambda cfg: polynomial_case(2, cfg.mu),
}


@dataclass
class StudyConfig:
    """
    Refinement study settings. Level i uses the family generator with
    n = start * 2**i.
    """
    family: str = "diagonal"
    levels: int = 6
    start: int = 2
    degree: int = 1
    mu: float = 1e-3
    case: str = "smooth"
    contrast: float = 1.0
    kappa: float = 1.0
    a_star: float = DEFAULT_A_STAR
    boundary: str = "mixed"
    solver: str = "cg"
    tol: float = DEFAULT_TOL
    reconstruct: bool = True
    quad_bump: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.family not in MESH_FAMILIES:
            raise ConfigError(f"Unknown mesh family '{self.family}' (choose from {', '.join(MESH_FAMILIES)})")
        if self.case not in CASES:
            raise ConfigError(f"Unknown case '{self.case}' (choose from {', '.join(CASES)})")
        if self.boundary not in BOUNDARY_LAYOUTS:
            raise ConfigError(f"Unknown boundary layout '{self.boundary}'")
        if self.levels < 1 or self.start < 1:
            raise ConfigError("levels and start must be positive")
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")

    def sizes(self) -> List[int]:
        return [self.start * 2 ** i for i in range(self.levels)]

    def mesh(self, n: int) -> Mesh:
        return classify_boundary(MESH_FAMILIES[self.family](n), BOUNDARY_LAYOUTS[self.boundary])

    def orders(self) -> QuadratureOrders:
        return QuadratureOrders(bump=self.quad_bump)


def run_level(config: StudyConfig, n: int, level: int = 0) -> tuple:
    """Solve one level of a study; returns (Solution, ErrorRecord)."""
    case = CASES[config.case](config)
    if config.kappa != 1.0 and case.subdomains is None:
        value = config.kappa
        case = replace(case, kappa=lambda p: np.full(p.shape[:-1], value))
    mesh = case.prepare(config.mesh(n))
    case = case.normalised_for(mesh)
    data = case.problem_data(config.degree, config.a_star, config.orders())
    solution: Solution = solve_problem(mesh, data, solver=config.solver, tol=config.tol,
                                       reconstruct=config.reconstruct, threads=config.threads)
    record = error_norms(solution.sigma, solution.velocity, solution.reconstruction, solution.pressure,
                         case, config.orders(), level=level)
    return solution, record


def convergence_study(config: StudyConfig) -> ErrorTable:
    """Run every level of a study and collect the error table."""
    table = ErrorTable(title=f"{config.case} case, k={config.degree}, {config.family} meshes")
    for level, n in enumerate(config.sizes(), start=1):
        try:
            _, record = run_level(config, n, level)
        except BrinkmanError as e:
            raise StudyError(level, e) from e
        table.append(record)
        rate = table.final_rate("e_norm")
        logger.info(f"level {level}: n={n} DoF={record.dofs} h={record.h:.3f} "
                    f"e_norm={record.e_norm:.3e} rate={'*' if math.isnan(rate) else f'{rate:.2f}'}")
    return table
