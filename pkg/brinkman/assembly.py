"""
Assembly of the symmetric interior penalty DG system for the stress.

For trial sigma and test tau in P_k(T_h, S):

    1/2 (sigma^D, tau^D) + theta (tr sigma, 1)(tr tau, 1) + (kappa div sigma, div tau)
    - <{kappa div sigma}, [[tau]]> - <{kappa div tau}, [[sigma]]>
    + a <gamma^-1 h_F^-1 [[sigma]], [[tau]]>                       (faces of F_h*)
  = <mu G_D, tau n>_D - (kappa F, div tau) + <{kappa F}, [[tau]]>
    - <kappa G_N, div tau>_N + a <gamma^-1 h_F^-1 G_N, tau n>_N

with a = a_star * k^2. The theta term is returned as a rank-one vector.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .dg_core import QuadratureOrders, StressSpace, face_quadrature
from .errors import AssemblyError, ConfigError
from .linalg import SparseSymmetric
from .mesh import BoundarySpec, classify_boundary
from .quadrature import triangle_rule
from .ref_elements import deviatoric, trace


logger = logging.getLogger(__name__)

DEFAULT_A_STAR = 10.0

# F(x, kappa): body force at physical points (..., 2), with kappa the
# permeability of the element each point is evaluated from
ForceFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
BoundaryFn = Callable[[np.ndarray], np.ndarray]
# G_N(x, n): traction at boundary points given the outward unit normals
TractionFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class ProblemData:
    """
    Physical and discretisation parameters of a Brinkman solve.

    mu = 0 is accepted for the zero-viscosity limit; velocity recovery is
    then undefined. Missing F, G_D and G_N are taken as zero.
    """
    mu: float = 1e-3
    force: Optional[ForceFn] = None
    dirichlet: Optional[BoundaryFn] = None
    neumann: Optional[TractionFn] = None
    a_star: float = DEFAULT_A_STAR
    degree: int = 1
    orders: QuadratureOrders = field(default_factory=QuadratureOrders)

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu < 0:
            raise ConfigError(f"viscosity must be non-negative, got {self.mu}")
        if not np.isfinite(self.a_star) or self.a_star <= 0:
            raise AssemblyError(f"penalty base a* must be positive, got {self.a_star}")

    @property
    def penalty(self) -> float:
        """a = a* k^2."""
        return self.a_star * self.degree ** 2

    def kappa_force(self, points: np.ndarray, kappa: np.ndarray) -> np.ndarray:
        """kappa F at points (n, nq, 2), kappa given per row (n,)."""
        if self.force is None:
            return np.zeros_like(points)
        k = np.broadcast_to(kappa[:, None], points.shape[:-1])
        return k[..., None] * np.asarray(self.force(points, k), dtype=float)

    def scaled(self, c: float) -> "ProblemData":
        """The same problem with F, G_D and G_N multiplied by c."""
        def scale(fn):
            return None if fn is None else (lambda *args: c * fn(*args))
        return ProblemData(self.mu, scale(self.force), scale(self.dirichlet), scale(self.neumann),
                           self.a_star, self.degree, self.orders)


@dataclass
class LinearSystem:
    """Sparse DG matrix, right-hand side and the theta rank-one vector."""
    space: StressSpace
    matrix: sp.csr_matrix
    rhs: np.ndarray
    rank_one: Optional[np.ndarray]
    data: ProblemData

    @property
    def theta(self) -> int:
        return int(self.rank_one is not None)

    @property
    def operator(self) -> SparseSymmetric:
        return SparseSymmetric(self.matrix, self.rank_one, block_size=self.space.dofs_per_element)

    @property
    def shape(self):
        return self.matrix.shape


# --- Local integrals ---

def _chunks(n: int, threads: int):
    bounds = np.linspace(0, n, max(1, min(threads, n)) + 1).astype(int)
    return [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _volume_blocks(space: StressSpace, elements: np.ndarray, degree: int) -> np.ndarray:
    rule = triangle_rule(degree)
    mesh = space.mesh
    dev = deviatoric(space.values(rule.points))
    ref_dev = 0.5 * np.einsum('q,qiab,qjab->ij', rule.weights, dev, dev)
    div = space.divergences(rule.points, elements)
    kdet = mesh.kappa[elements] * mesh.det_jacobians[elements]
    blocks = np.einsum('q,kqia,kqja->kij', rule.weights, div, div) * kdet[:, None, None]
    blocks += mesh.det_jacobians[elements][:, None, None] * ref_dev
    return blocks


def trace_vector(space: StressSpace) -> np.ndarray:
    """t_i = (tr phi_i, 1) over the domain."""
    rule = triangle_rule(space.degree)
    tr = trace(space.values(rule.points))
    local = np.einsum('q,qi->i', rule.weights, tr)
    return (space.mesh.det_jacobians[:, None] * local[None, :]).ravel()


class _FaceBasis:
    """
    Traces of every local basis function on a set of faces, per side:
        jump[s]  phi_i n_s                         (nF, nq, n, 2)
        kdiv[s]  w_s kappa_s div phi_i             (nF, nq, n, 2)
    with w_s = 1/2 on interior faces and 1 on boundary faces.
    """

    def __init__(self, space: StressSpace, faces: np.ndarray, degree: int):
        self.fq = fq = face_quadrature(space.mesh, faces, degree)
        kappa = space.mesh.kappa
        interior = fq.interior
        self.sides = 2 if np.any(interior) else 1
        self.jump, self.kdiv, self.dofs = [], [], []
        for side in range(self.sides):
            present = fq.elements[:, side] >= 0
            el = np.where(present, fq.elements[:, side], 0)
            vals = space.values(fq.ref_points[:, side])
            div = space.divergences(fq.ref_points[:, side], el)
            w = np.where(interior, 0.5, 1.0) * kappa[el] * present
            self.jump.append(np.einsum('fqiab,fb->fqia', vals, fq.side_normals(side)) * present[:, None, None, None])
            self.kdiv.append(div * w[:, None, None, None])
            self.dofs.append(np.where(present[:, None], space.element_dofs[el], -1))
        self.penalty_weight = fq.gamma_inverse / fq.lengths

    def scatter_rows(self, side: int, values: np.ndarray, out: np.ndarray):
        """Add per-face row contributions (nF, n) of one side into a global vector."""
        rows = self.dofs[side]
        mask = rows >= 0
        np.add.at(out, rows[mask], values[mask])


def _face_matrix(fb: _FaceBasis, a: float, ndofs: int) -> sp.csr_matrix:
    w = fb.fq.weights
    pen = a * fb.penalty_weight
    rows, cols, vals = [], [], []
    for s in range(fb.sides):
        for t in range(fb.sides):
            block = -np.einsum('fq,fqja,fqia->fij', w, fb.kdiv[t], fb.jump[s])
            block -= np.einsum('fq,fqia,fqja->fij', w, fb.kdiv[s], fb.jump[t])
            block += np.einsum('fq,f,fqia,fqja->fij', w, pen, fb.jump[s], fb.jump[t])
            r = np.broadcast_to(fb.dofs[s][:, :, None], block.shape)
            c = np.broadcast_to(fb.dofs[t][:, None, :], block.shape)
            keep = (r >= 0) & (c >= 0)
            rows.append(r[keep])
            cols.append(c[keep])
            vals.append(block[keep])
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(ndofs, ndofs)).tocsr()


def _volume_matrix(space: StressSpace, degree: int, threads: int) -> sp.csr_matrix:
    chunks = _chunks(space.mesh.num_elements, threads)
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda el: _volume_blocks(space, el, degree), chunks))
    else:
        parts = [_volume_blocks(space, chunks[0], degree)]
    blocks = np.concatenate(parts)
    return _block_diagonal(blocks, space.dofs_per_element)


def _block_diagonal(blocks: np.ndarray, n: int) -> sp.csr_matrix:
    ne = len(blocks)
    base = (np.arange(ne) * n)[:, None, None]
    rows = np.broadcast_to(base + np.arange(n)[None, :, None], blocks.shape).ravel()
    cols = np.broadcast_to(base + np.arange(n)[None, None, :], blocks.shape).ravel()
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(ne * n, ne * n)).tocsr()


# --- Right-hand side ---

def _volume_rhs(space: StressSpace, data: ProblemData, degree: int) -> np.ndarray:
    if data.force is None:
        return np.zeros(space.ndofs)
    mesh = space.mesh
    rule = triangle_rule(degree)
    x = mesh.to_physical(rule.points)
    kf = data.kappa_force(x, mesh.kappa)
    div = space.divergences(rule.points)
    local = -np.einsum('q,k,kqa,kqia->ki', rule.weights, mesh.det_jacobians, kf, div)
    return local.ravel()


def _face_rhs(space: StressSpace, data: ProblemData, fb: _FaceBasis, out: np.ndarray):
    """<{kappa F}, [[tau]]> on F_h*, plus the Neumann data terms on boundary faces."""
    fq = fb.fq
    w = fq.weights
    if data.force is not None:
        kappa = space.mesh.kappa
        avg = np.zeros_like(fq.points)
        for side in range(fb.sides):
            present = fq.elements[:, side] >= 0
            el = np.where(present, fq.elements[:, side], 0)
            weight = np.where(fq.interior, 0.5, 1.0) * present
            avg += weight[:, None, None] * data.kappa_force(fq.points, kappa[el])
        for side in range(fb.sides):
            fb.scatter_rows(side, np.einsum('fq,fqa,fqia->fi', w, avg, fb.jump[side]), out)

    boundary = ~fq.interior
    if data.neumann is not None and np.any(boundary):
        normals = np.broadcast_to(fq.normals[:, None, :], fq.points.shape)
        gn = np.asarray(data.neumann(fq.points, normals), dtype=float) * boundary[:, None, None]
        # kdiv on boundary faces is kappa_K div phi_i
        contrib = -np.einsum('fq,fqa,fqia->fi', w, gn, fb.kdiv[0])
        contrib += data.penalty * np.einsum('fq,f,fqa,fqia->fi', w, fb.penalty_weight, gn, fb.jump[0])
        fb.scatter_rows(0, contrib, out)


def _dirichlet_rhs(space: StressSpace, data: ProblemData, degree: int, out: np.ndarray):
    faces = space.mesh.dirichlet_faces
    if data.dirichlet is None or len(faces) == 0 or data.mu == 0:
        return
    fb = _FaceBasis(space, faces, degree)
    gd = np.asarray(data.dirichlet(fb.fq.points), dtype=float)
    fb.scatter_rows(0, data.mu * np.einsum('fq,fqa,fqia->fi', fb.fq.weights, gd, fb.jump[0]), out)


def _dg_face_groups(space: StressSpace):
    """Interior and Neumann faces of F_h*, assembled as separate groups."""
    mesh = space.mesh
    return [g for g in (mesh.interior_faces, mesh.neumann_faces) if len(g)]


def assemble(space: StressSpace, data: ProblemData, boundary: Optional[BoundarySpec] = None,
             threads: int = 1) -> LinearSystem:
    """
    Assemble the DG system.

    Args:
        space: stress space on a mesh with kappa set
        data: problem data; data.degree must match space.degree
        boundary: optional layout; when it differs from the mesh's own the
            mesh is reclassified and a new space is built
        threads: element chunks assembled concurrently (results do not
            depend on the count)

    Returns:
        LinearSystem with theta rank-one vector when no Neumann faces exist
    """
    if data.degree != space.degree:
        raise AssemblyError(f"problem degree {data.degree} does not match space degree {space.degree}")
    if boundary is not None and space.mesh.boundary is not boundary:
        space = StressSpace(classify_boundary(space.mesh, boundary), space.degree)
    mesh = space.mesh
    k = space.degree
    form_degree = data.orders.form_degree(k)
    data_degree = data.orders.data_degree(k)

    matrix = _volume_matrix(space, form_degree, threads)
    for faces in _dg_face_groups(space):
        matrix = matrix + _face_matrix(_FaceBasis(space, faces, form_degree), data.penalty, space.ndofs)
    matrix = ((matrix + matrix.T) * 0.5).tocsr()

    rhs = _volume_rhs(space, data, data_degree)
    for faces in _dg_face_groups(space):
        _face_rhs(space, data, _FaceBasis(space, faces, data_degree), rhs)
    _dirichlet_rhs(space, data, data_degree, rhs)

    rank_one = trace_vector(space) if mesh.theta else None
    logger.info(f"Assembled {space.ndofs} DoFs, {matrix.nnz} nonzeros, theta={mesh.theta}, "
                f"a={data.penalty:g}")
    return LinearSystem(space, matrix, rhs, rank_one, data)


# --- Consistency ---

def consistency_residual(space: StressSpace, data: ProblemData, boundary: Optional[BoundarySpec],
                         exact) -> float:
    """
    max_i |lhs(sigma, phi_i) - rhs(phi_i)| for an exact stress.

    `exact` provides stress(x) -> (..., 2, 2) and stress_divergence(x) -> (..., 2).
    All integrals use the data quadrature.
    """
    system = assemble(space, data, boundary)
    space = system.space
    mesh = space.mesh
    degree = data.orders.data_degree(space.degree)

    rule = triangle_rule(degree)
    x = mesh.to_physical(rule.points)
    sig = exact.stress(x)
    dsig = exact.stress_divergence(x)
    phi_dev = deviatoric(space.values(rule.points))
    div = space.divergences(rule.points)
    lhs = 0.5 * np.einsum('q,k,kqab,qiab->ki', rule.weights, mesh.det_jacobians, deviatoric(sig), phi_dev)
    lhs += np.einsum('q,k,kqa,kqia->ki', rule.weights, mesh.kappa * mesh.det_jacobians, dsig, div)
    lhs = lhs.ravel()
    if system.rank_one is not None:
        tr_integral = np.einsum('q,k,kq->', rule.weights, mesh.det_jacobians, trace(sig))
        lhs += tr_integral * system.rank_one

    a = data.penalty
    for faces in _dg_face_groups(space):
        fb = _FaceBasis(space, faces, degree)
        fq = fb.fq
        s = exact.stress(fq.points)
        ds = exact.stress_divergence(fq.points)
        jump = np.zeros_like(fq.points)
        kavg = np.zeros_like(fq.points)
        for side in range(fb.sides):
            present = fq.elements[:, side] >= 0
            el = np.where(present, fq.elements[:, side], 0)
            jump += np.einsum('fqab,fb->fqa', s, fq.side_normals(side)) * present[:, None, None]
            weight = np.where(fq.interior, 0.5, 1.0) * present * mesh.kappa[el]
            kavg += weight[:, None, None] * ds
        for side in range(fb.sides):
            contrib = -np.einsum('fq,fqa,fqia->fi', fq.weights, kavg, fb.jump[side])
            contrib -= np.einsum('fq,fqia,fqa->fi', fq.weights, fb.kdiv[side], jump)
            contrib += a * np.einsum('fq,f,fqa,fqia->fi', fq.weights, fb.penalty_weight, jump, fb.jump[side])
            fb.scatter_rows(side, contrib, lhs)

    residual = float(np.max(np.abs(lhs - system.rhs)))
    logger.info(f"Consistency residual {residual:.3e} ({space.ndofs} DoFs)")
    return residual
