"""
Brezzi-Douglas-Marini H(div) elements built directly on physical triangles.

Degrees of freedom of BDM_m on K:
    edge F:    int_F v.n_F q ds,  q in P_m(F)   (m + 1 per edge)
    interior:  int_K v.w dx,      w in ND_{m-1}  ((m + 1)(m - 1) for m >= 2)

Edge functionals use the global face normal and the global edge
parametrisation (from faces[f, 0] to faces[f, 1]), so the two elements
sharing a face see the same functionals and the normal trace is single
valued without sign bookkeeping. Interior functionals live in physical
coordinates, which keeps div(interpolant) equal to the element-wise
L2 projection of div v.
"""
import logging
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import legvander

from .dg_core import project_local
from .errors import ConfigError
from .mesh import Mesh
from .quadrature import edge_rule, triangle_rule
from .ref_elements import ScalarBasis, monomial_exponents


logger = logging.getLogger(__name__)

MAX_ORDER = 3


def _scaled(points, centres, scales):
    """Element-centred, diameter-scaled coordinates of points (ne, P, 2)."""
    return (points - centres[:, None, :]) / scales[:, None, None]


def _monomials(Z, exponents):
    a = np.array([e[0] for e in exponents])
    b = np.array([e[1] for e in exponents])
    return np.power(Z[..., 0:1], a) * np.power(Z[..., 1:2], b)


def _monomial_dx_dy(Z, exponents):
    a = np.array([e[0] for e in exponents])
    b = np.array([e[1] for e in exponents])
    X = Z[..., 0:1]
    Y = Z[..., 1:2]
    dx = a * np.power(X, np.maximum(a - 1, 0)) * np.power(Y, b)
    dy = b * np.power(X, a) * np.power(Y, np.maximum(b - 1, 0))
    return dx, dy


def _nedelec_functions(Z, order):
    """
    First-kind Nedelec space ND_order at scaled points: P_{order-1}^2 plus
    (-Y, X) times homogeneous polynomials of degree order - 1.

    Returns:
        (..., dim ND_order, 2)
    """
    low = monomial_exponents(order - 1)
    m = _monomials(Z, low)
    zero = np.zeros_like(m)
    full = np.concatenate([np.stack([m, zero], axis=-1), np.stack([zero, m], axis=-1)], axis=-2)
    top = [(order - 1 - b, b) for b in range(order)]
    h = _monomials(Z, top)
    rot = np.stack([-Z[..., 1:2] * h, Z[..., 0:1] * h], axis=-1)
    return np.concatenate([full, rot], axis=-2)


class BDMElement:
    """
    Sizes and local layout of BDM_order.

    Local DoFs: edge 0 moments, edge 1 moments, edge 2 moments, then the
    interior moments. The prime basis is the full vector P_order.
    """

    def __init__(self, order: int):
        if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
            raise ConfigError(f"BDM order must be in 1..{MAX_ORDER}, got {order!r}")
        self.order = int(order)
        self.exponents = monomial_exponents(self.order)
        self.dim = (self.order + 1) * (self.order + 2)
        self.edge_dofs = self.order + 1
        self.interior_dofs = (self.order + 1) * (self.order - 1)

    def prime_values(self, Z: np.ndarray) -> np.ndarray:
        """Vector monomials at scaled points (..., 2) -> (..., dim, 2)."""
        m = _monomials(Z, self.exponents)
        zero = np.zeros_like(m)
        return np.concatenate([np.stack([m, zero], axis=-1), np.stack([zero, m], axis=-1)], axis=-2)

    def prime_divergence(self, Z: np.ndarray) -> np.ndarray:
        """Divergence with respect to the scaled coordinates: (..., dim)."""
        dx, dy = _monomial_dx_dy(Z, self.exponents)
        return np.concatenate([dx, dy], axis=-1)

    def interior_functions(self, Z: np.ndarray) -> np.ndarray:
        return _nedelec_functions(Z, self.order - 1)


class BDMSpace:
    """
    Global H(div)-conforming BDM_order space on a mesh.

    Global numbering: edge DoFs face-major first (face f owns
    [f * (order+1), (f+1) * (order+1))), then interior DoFs element-major.
    """

    def __init__(self, mesh: Mesh, order: int):
        self.mesh = mesh
        self.element = BDMElement(order)
        self.order = self.element.order
        el = self.element
        self.num_edge_dofs = mesh.num_faces * el.edge_dofs
        self.ndofs = self.num_edge_dofs + mesh.num_elements * el.interior_dofs

        edge = (mesh.element_faces[:, :, None] * el.edge_dofs + np.arange(el.edge_dofs)).reshape(mesh.num_elements, -1)
        interior = self.num_edge_dofs + (np.arange(mesh.num_elements)[:, None] * el.interior_dofs
                                         + np.arange(el.interior_dofs))
        self.element_dofs = np.hstack([edge, interior])
        self.centres = mesh.centroids
        self.scales = mesh.diameters
        self.coefficients = np.linalg.inv(self._dual_matrix())
        logger.debug(f"BDM_{order}: {self.ndofs} DoFs, "
                     f"max local condition {np.max(np.linalg.cond(self.coefficients)):.2e}")

    # --- Functionals ---

    def _face_samples(self, faces: np.ndarray, degree: int):
        rule = edge_rule(degree)
        m = self.mesh
        a = m.vertices[m.faces[faces, 0]]
        b = m.vertices[m.faces[faces, 1]]
        pts = a[..., None, :] + rule.points[:, None] * (b - a)[..., None, :]
        w = m.face_lengths[faces][..., None] * rule.weights
        q = legvander(2.0 * rule.points - 1.0, self.order)
        return pts, w, q, m.face_normals[faces]

    def _dual_matrix(self) -> np.ndarray:
        el = self.element
        m = self.mesh
        ne = m.num_elements
        pts, w, q, normals = self._face_samples(m.element_faces, 2 * self.order)
        nq = pts.shape[2]
        Z = _scaled(pts.reshape(ne, -1, 2), self.centres, self.scales).reshape(ne, 3, nq, 2)
        psi_n = np.einsum('keqjd,ked->keqj', el.prime_values(Z), normals)
        edge = np.einsum('keq,ql,keqj->kelj', w, q, psi_n).reshape(ne, 3 * el.edge_dofs, el.dim)
        if el.interior_dofs == 0:
            return edge
        rule = triangle_rule(2 * self.order)
        Zi = _scaled(m.to_physical(rule.points), self.centres, self.scales)
        inner = np.einsum('q,k,kqid,kqjd->kij', rule.weights, m.det_jacobians,
                          el.interior_functions(Zi), el.prime_values(Zi))
        return np.concatenate([edge, inner], axis=1)

    # --- Basis evaluation ---

    def values_at(self, points: np.ndarray, elements=None) -> np.ndarray:
        """Basis values at physical points (n, nq, 2) of elements (n,): (n, nq, dim, 2)."""
        elements = np.arange(self.mesh.num_elements) if elements is None else np.asarray(elements)
        Z = _scaled(points, self.centres[elements], self.scales[elements])
        return np.einsum('kqjd,kji->kqid', self.element.prime_values(Z), self.coefficients[elements])

    def divergence_at(self, points: np.ndarray, elements=None) -> np.ndarray:
        elements = np.arange(self.mesh.num_elements) if elements is None else np.asarray(elements)
        Z = _scaled(points, self.centres[elements], self.scales[elements])
        div = self.element.prime_divergence(Z) / self.scales[elements][:, None, None]
        return np.einsum('kqj,kji->kqi', div, self.coefficients[elements])

    def values(self, ref_points: np.ndarray) -> np.ndarray:
        return self.values_at(self.mesh.to_physical(ref_points))

    def divergence(self, ref_points: np.ndarray) -> np.ndarray:
        return self.divergence_at(self.mesh.to_physical(ref_points))

    # --- Global matrices ---

    def _scatter(self, local: np.ndarray, rows: np.ndarray, cols: np.ndarray, shape) -> sp.csr_matrix:
        r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
        c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
        return sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()

    @cached_property
    def mass_matrix(self) -> sp.csr_matrix:
        rule = triangle_rule(2 * self.order)
        v = self.values(rule.points)
        local = np.einsum('q,k,kqid,kqjd->kij', rule.weights, self.mesh.det_jacobians, v, v)
        return self._scatter(local, self.element_dofs, self.element_dofs, (self.ndofs, self.ndofs))

    def divergence_matrix(self, multipliers: "MultiplierSpace") -> sp.csr_matrix:
        """B[i, j] = (div phi_j, eta_i) with eta from an L2(K)-orthonormal P_r basis."""
        rule = triangle_rule(self.order - 1 + multipliers.degree)
        div = self.divergence(rule.points)
        eta = multipliers.values(rule.points)
        local = np.einsum('q,k,kqi,kqj->kij', rule.weights, self.mesh.det_jacobians, eta, div)
        return self._scatter(local, multipliers.element_dofs, self.element_dofs,
                             (multipliers.ndofs, self.ndofs))

    def zero_field(self) -> "BDMField":
        return BDMField(self, np.zeros(self.ndofs))


class MultiplierSpace:
    """Discontinuous P_degree scalars, scaled so that each element basis is L2(K)-orthonormal."""

    def __init__(self, mesh: Mesh, degree: int):
        self.mesh = mesh
        self.degree = int(degree)
        self.scalar = ScalarBasis(self.degree)
        self.dofs_per_element = self.scalar.dim
        self.ndofs = mesh.num_elements * self.dofs_per_element
        self.element_dofs = np.arange(self.ndofs).reshape(mesh.num_elements, -1)

    def values(self, ref_points: np.ndarray) -> np.ndarray:
        """(ne, nq, dim)."""
        phi = self.scalar.eval(ref_points)
        return phi[None] / np.sqrt(self.mesh.det_jacobians)[:, None, None]


class BDMField:
    """Coefficient vector over a BDMSpace."""

    def __init__(self, space: BDMSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.ndofs,):
            raise ConfigError(f"BDM field needs {space.ndofs} coefficients, got {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    @property
    def local(self) -> np.ndarray:
        return self.coeffs[self.space.element_dofs]

    def values(self, ref_points: np.ndarray) -> np.ndarray:
        """(ne, nq, 2)."""
        return np.einsum('kqid,ki->kqd', self.space.values(ref_points), self.local)

    def divergence(self, ref_points: np.ndarray) -> np.ndarray:
        return np.einsum('kqi,ki->kq', self.space.divergence(ref_points), self.local)

    def values_at(self, points: np.ndarray, elements: np.ndarray) -> np.ndarray:
        return np.einsum('kqid,ki->kqd', self.space.values_at(points, elements), self.local[elements])

    def divergence_at(self, points: np.ndarray, elements: np.ndarray) -> np.ndarray:
        return np.einsum('kqi,ki->kq', self.space.divergence_at(points, elements), self.local[elements])

    def normal_jumps(self, degree: Optional[int] = None) -> np.ndarray:
        """(v_K - v_K').n_F at Gauss points of every interior face: (nF_int, nq)."""
        m = self.space.mesh
        faces = m.interior_faces
        rule = edge_rule(degree or 2 * self.space.order)
        a = m.vertices[m.faces[faces, 0]]
        b = m.vertices[m.faces[faces, 1]]
        pts = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
        left = self.values_at(pts, m.face_elements[faces, 0])
        right = self.values_at(pts, m.face_elements[faces, 1])
        return np.einsum('fqd,fd->fq', left - right, m.face_normals[faces])

    def divergence_moments(self, multipliers: MultiplierSpace) -> np.ndarray:
        return self.space.divergence_matrix(multipliers) @ self.coeffs


def bdm_interpolate(v: Callable[[np.ndarray], np.ndarray], order: int, mesh: Mesh,
                    quad_degree: Optional[int] = None) -> BDMField:
    """
    Canonical BDM_order interpolant of a smooth vector field.

    Args:
        v: maps physical points (..., 2) to vectors (..., 2)
        quad_degree: exactness of the moment quadratures (default 2*order + 8)
    """
    space = BDMSpace(mesh, order)
    el = space.element
    degree = min(quad_degree if quad_degree is not None else 2 * order + 8, 20)

    pts, w, q, normals = space._face_samples(np.arange(mesh.num_faces), degree)
    vn = np.einsum('fqd,fd->fq', np.asarray(v(pts), dtype=float), normals)
    coeffs = np.empty(space.ndofs)
    coeffs[:space.num_edge_dofs] = np.einsum('fq,ql,fq->fl', w, q, vn).ravel()

    if el.interior_dofs:
        rule = triangle_rule(degree)
        x = mesh.to_physical(rule.points)
        Z = _scaled(x, space.centres, space.scales)
        inner = np.einsum('q,k,kqid,kqd->ki', rule.weights, mesh.det_jacobians,
                          el.interior_functions(Z), np.asarray(v(x), dtype=float))
        coeffs[space.num_edge_dofs:] = inner.ravel()
    return BDMField(space, coeffs)


def commuting_defect(v: Callable[[np.ndarray], np.ndarray], div_v: Callable[[np.ndarray], np.ndarray],
                     order: int, mesh: Mesh, quad_degree: Optional[int] = None) -> float:
    """||div(interpolant of v) - Q^{order-1} div v||_0, which vanishes up to round-off."""
    interpolant = bdm_interpolate(v, order, mesh, quad_degree)
    rule = triangle_rule(min(quad_degree if quad_degree is not None else 2 * order + 8, 20))
    x = mesh.to_physical(rule.points)
    projected = project_local(mesh, order - 1, np.asarray(div_v(x), dtype=float)[..., None], rule)[:, 0]
    q = ScalarBasis(order - 1).eval(rule.points)
    diff = interpolant.divergence(rule.points) - projected @ q.T
    return float(np.sqrt(np.einsum('q,k,kq->', rule.weights, mesh.det_jacobians, diff ** 2)))
