"""
Discontinuous stress space P_k(T_h, S), field containers, element-wise L2
projections, and face traces (jumps and averages).

Global DoFs are element-major: element K owns the contiguous block
[K * dofs_per_element, (K + 1) * dofs_per_element), ordered xx, xy, yy,
each component block following the scalar basis.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AssemblyError, ConfigError
from .mesh import INTERIOR, NEUMANN, DIRICHLET, Mesh
from .quadrature import edge_rule, triangle_rule
from .ref_elements import ScalarBasis, SymTensorBasis, deviatoric, sym_tensor_basis, trace


@dataclass(frozen=True)
class QuadratureOrders:
    """
    Exactness degrees used for a stress degree k.

    Bilinear forms have polynomial integrands of degree <= 2k, so 2k + 2 is
    exact. Manufactured data and error norms are trigonometric: 2k + 6,
    raised further by `bump`.
    """
    form: Optional[int] = None
    data: Optional[int] = None
    bump: int = 0

    def form_degree(self, k: int) -> int:
        return self.form if self.form is not None else 2 * k + 2

    def data_degree(self, k: int) -> int:
        degree = self.data if self.data is not None else 2 * k + 6
        return min(degree + self.bump, 20)


@dataclass
class FaceQuadrature:
    """Quadrature data for a set of faces, shared by both neighbours."""
    faces: np.ndarray          # (nF,)
    elements: np.ndarray       # (nF, 2), second column -1 on boundary faces
    normals: np.ndarray        # (nF, 2) outward from elements[:, 0]
    lengths: np.ndarray        # (nF,)
    points: np.ndarray         # (nF, nq, 2) physical points
    weights: np.ndarray        # (nF, nq) physical weights
    ref_points: np.ndarray     # (nF, 2, nq, 2) points pulled back to each side
    tags: np.ndarray           # (nF,)
    gamma_inverse: np.ndarray  # (nF,)

    @property
    def interior(self) -> np.ndarray:
        return self.elements[:, 1] >= 0

    def side_normals(self, side: int) -> np.ndarray:
        return self.normals if side == 0 else -self.normals


def face_quadrature(mesh: Mesh, faces, degree: int) -> FaceQuadrature:
    """
    Generate quadrature points once per face in physical coordinates and pull
    them back to both neighbours.
    """
    faces = np.asarray(faces, dtype=np.int64)
    rule = edge_rule(degree)
    a = mesh.vertices[mesh.faces[faces, 0]]
    b = mesh.vertices[mesh.faces[faces, 1]]
    points = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    lengths = mesh.face_lengths[faces]
    weights = lengths[:, None] * rule.weights[None, :]
    elements = mesh.face_elements[faces]
    ref = np.zeros((len(faces), 2, rule.size, 2))
    ref[:, 0] = mesh.to_reference(points, elements[:, 0])
    inner = elements[:, 1] >= 0
    if np.any(inner):
        ref[inner, 1] = mesh.to_reference(points[inner], elements[inner, 1])
    return FaceQuadrature(
        faces=faces, elements=elements, normals=mesh.face_normals[faces], lengths=lengths,
        points=points, weights=weights, ref_points=ref, tags=mesh.face_tags[faces],
        gamma_inverse=mesh.face_gamma_inverse(faces),
    )


class StressSpace:
    """P_k(T_h, S) on a mesh."""

    def __init__(self, mesh: Mesh, degree: int):
        self.mesh = mesh
        self.degree = int(degree)
        self.basis = sym_tensor_basis(degree)
        self.scalar = self.basis.scalar
        self.dofs_per_element = self.basis.dim
        self.ndofs = mesh.num_elements * self.dofs_per_element
        self.element_dofs = np.arange(self.ndofs).reshape(mesh.num_elements, self.dofs_per_element)

    def physical_gradients(self, ref_points: np.ndarray, elements=None) -> np.ndarray:
        """
        Scalar basis gradients mapped with J^-T.

        ref_points is either (nq, 2), shared by every element, or
        (n, nq, 2) with one row per entry of `elements`.
        """
        elements = np.arange(self.mesh.num_elements) if elements is None else np.asarray(elements)
        g = self.scalar.grad(ref_points)
        inv_t = self.mesh.inverse_transposed[elements]
        if g.ndim == 3:
            return np.einsum('kab,qnb->kqna', inv_t, g)
        return np.einsum('kab,kqnb->kqna', inv_t, g)

    def divergences(self, ref_points: np.ndarray, elements=None) -> np.ndarray:
        """Divergence of every tensor basis function: (n, nq, dofs_per_element, 2)."""
        return self.basis.divergence(self.physical_gradients(ref_points, elements))

    def values(self, ref_points: np.ndarray) -> np.ndarray:
        """Tensor basis values (affine maps leave them unchanged)."""
        return self.basis.values(ref_points)

    def zero_field(self) -> "StressField":
        return StressField(self, np.zeros(self.ndofs))

    def interpolate_constant(self, tensor) -> "StressField":
        """Coefficients of a globally constant symmetric tensor."""
        tensor = np.asarray(tensor, dtype=float)
        if not np.allclose(tensor, tensor.T):
            raise ConfigError("stress tensors must be symmetric")
        phi0 = self.scalar.eval(np.array([1.0 / 3.0, 1.0 / 3.0]))[0]
        local = np.zeros(self.dofs_per_element)
        n = self.scalar.dim
        local[0] = tensor[0, 0] / phi0
        local[n] = tensor[0, 1] / phi0
        local[2 * n] = tensor[1, 1] / phi0
        return StressField(self, np.tile(local, self.mesh.num_elements))

    def project(self, tensor_fn: Callable[[np.ndarray], np.ndarray], quad_degree: Optional[int] = None) -> "StressField":
        """Element-wise L2 projection of a symmetric tensor function (points -> (..., 2, 2))."""
        rule = triangle_rule(quad_degree or min(2 * self.degree + 6, 20))
        x = self.mesh.to_physical(rule.points)
        t = tensor_fn(x)
        comps = np.stack([t[..., 0, 0], 0.5 * (t[..., 0, 1] + t[..., 1, 0]), t[..., 1, 1]], axis=-1)
        phi = self.scalar.eval(rule.points)
        local = np.einsum('q,qn,kqc->kcn', rule.weights, phi, comps)
        return StressField(self, local.reshape(-1))


class StressField:
    """Coefficient vector over a StressSpace."""

    def __init__(self, space: StressSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.ndofs,):
            raise ConfigError(f"stress field needs {space.ndofs} coefficients, got {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    @property
    def local(self) -> np.ndarray:
        return self.coeffs.reshape(self.space.mesh.num_elements, self.space.dofs_per_element)

    def values(self, ref_points: np.ndarray) -> np.ndarray:
        """(ne, nq, 2, 2) at reference points shared by all elements."""
        return np.einsum('qiab,ki->kqab', self.space.values(ref_points), self.local)

    def divergence(self, ref_points: np.ndarray) -> np.ndarray:
        """(ne, nq, 2)."""
        return np.einsum('kqia,ki->kqa', self.space.divergences(ref_points), self.local)

    def values_on(self, ref_points: np.ndarray, elements: np.ndarray) -> np.ndarray:
        """(n, nq, 2, 2) with per-entry reference points (n, nq, 2)."""
        vals = self.space.values(ref_points)
        return np.einsum('kqiab,ki->kqab', vals, self.local[elements])

    def divergence_on(self, ref_points: np.ndarray, elements: np.ndarray) -> np.ndarray:
        div = self.space.divergences(ref_points, elements)
        return np.einsum('kqia,ki->kqa', div, self.local[elements])

    def trace_integral(self) -> float:
        """(tr sigma_h, 1) over the domain."""
        rule = triangle_rule(self.space.degree)
        tr = trace(self.values(rule.points))
        return float(np.einsum('q,kq,k->', rule.weights, tr, self.space.mesh.det_jacobians))

    def l2_norm(self) -> float:
        rule = triangle_rule(2 * self.space.degree)
        v = self.values(rule.points)
        return float(np.sqrt(np.einsum('q,kqab,kqab,k->', rule.weights, v, v, self.space.mesh.det_jacobians)))

    def __add__(self, other: "StressField") -> "StressField":
        return StressField(self.space, self.coeffs + other.coeffs)

    def __mul__(self, scalar: float) -> "StressField":
        return StressField(self.space, scalar * self.coeffs)

    __rmul__ = __mul__


class PiecewiseVectorField:
    """
    Coefficients over P_degree(T_h, R^2); per element the x-component block
    is followed by the y-component block.
    """

    def __init__(self, mesh: Mesh, degree: int, coeffs):
        self.mesh = mesh
        self.degree = int(degree)
        self.scalar = ScalarBasis(degree)
        coeffs = np.asarray(coeffs, dtype=float)
        expected = mesh.num_elements * 2 * self.scalar.dim
        if coeffs.shape != (expected,):
            raise ConfigError(f"vector field needs {expected} coefficients, got {coeffs.shape}")
        self.coeffs = coeffs

    @property
    def local(self) -> np.ndarray:
        """(ne, 2, dim)."""
        return self.coeffs.reshape(self.mesh.num_elements, 2, self.scalar.dim)

    def values(self, ref_points: np.ndarray) -> np.ndarray:
        """(ne, nq, 2)."""
        return np.einsum('qn,kcn->kqc', self.scalar.eval(ref_points), self.local)

    def values_on(self, ref_points: np.ndarray, elements: np.ndarray) -> np.ndarray:
        return np.einsum('kqn,kcn->kqc', self.scalar.eval(ref_points), self.local[elements])


def project_local(mesh: Mesh, degree: int, values: np.ndarray, rule) -> np.ndarray:
    """
    Element-wise L2 projection coefficients of sampled values.

    The reference basis is orthonormal, so on K the projection coefficients
    are the reference-weighted moments of the samples.

    Args:
        values: (ne, nq, c) samples at the physical images of rule.points

    Returns:
        (ne, c, dim P_degree)
    """
    phi = ScalarBasis(degree).eval(rule.points)
    return np.einsum('q,qn,kqc->kcn', rule.weights, phi, values)


def l2_project_vector(f: Callable[[np.ndarray], np.ndarray], degree: int, mesh: Mesh,
                      quad_degree: Optional[int] = None) -> PiecewiseVectorField:
    """
    Element-wise L2 projection of a vector function onto P_degree(T_h, R^2).

    Args:
        f: maps physical points (..., 2) to vectors (..., 2)
        degree: polynomial degree of the target space
        quad_degree: exactness degree of the element rule (default 2*degree + 6)
    """
    rule = triangle_rule(quad_degree if quad_degree is not None else min(2 * degree + 6, 20))
    x = mesh.to_physical(rule.points)
    local = project_local(mesh, degree, np.asarray(f(x), dtype=float), rule)
    return PiecewiseVectorField(mesh, degree, local.reshape(-1))


# --- Face traces ---

def _side_traces(field: StressField, fq: FaceQuadrature, side: int):
    """Per-face tensor values and divergences on one side (boundary faces: zeros on side 1)."""
    nF, nq = fq.weights.shape
    vals = np.zeros((nF, nq, 2, 2))
    divs = np.zeros((nF, nq, 2))
    mask = fq.elements[:, side] >= 0
    if np.any(mask):
        el = fq.elements[mask, side]
        pts = fq.ref_points[mask, side]
        vals[mask] = field.values_on(pts, el)
        divs[mask] = field.divergence_on(pts, el)
    return vals, divs


def face_traces(field: StressField, fq: FaceQuadrature):
    """
    Jump [[tau]] and average {kappa div tau} on every face of `fq`.

    Interior: tau_K n_K + tau_K' n_K' and (kappa_K div tau_K + kappa_K' div tau_K') / 2.
    Boundary: tau_K n_K and kappa_K div tau_K.

    Returns:
        (jump, average), both (nF, nq, 2)
    """
    kappa = field.space.mesh.kappa
    interior = fq.interior
    jump = np.zeros(fq.weights.shape + (2,))
    avg = np.zeros_like(jump)
    for side in (0, 1):
        vals, divs = _side_traces(field, fq, side)
        n = fq.side_normals(side)
        jump += np.einsum('fqab,fb->fqa', vals, n)
        el = np.maximum(fq.elements[:, side], 0)
        present = fq.elements[:, side] >= 0
        w = np.where(interior, 0.5, 1.0) * present * kappa[el]
        avg += w[:, None, None] * divs
    return jump, avg


def _single_face(field: StressField, face: int, s, swap: bool) -> FaceQuadrature:
    mesh = field.space.mesh
    if mesh.face_tags[face] == DIRICHLET:
        raise AssemblyError(f"face {face} is a Dirichlet face and not part of F_h*")
    if s is None:
        fq = face_quadrature(mesh, [face], 2 * field.space.degree + 2)
    else:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        a = mesh.vertices[mesh.faces[face, 0]]
        b = mesh.vertices[mesh.faces[face, 1]]
        pts = (a + s[:, None] * (b - a))[None]
        el = mesh.face_elements[[face]]
        ref = np.zeros((1, 2, len(s), 2))
        ref[:, 0] = mesh.to_reference(pts, el[:, 0])
        if el[0, 1] >= 0:
            ref[:, 1] = mesh.to_reference(pts, el[:, 1])
        fq = FaceQuadrature(
            faces=np.array([face]), elements=el, normals=mesh.face_normals[[face]],
            lengths=mesh.face_lengths[[face]], points=pts,
            weights=np.full((1, len(s)), np.nan), ref_points=ref, tags=mesh.face_tags[[face]],
            gamma_inverse=mesh.face_gamma_inverse([face]),
        )
    if swap and fq.elements[0, 1] >= 0:
        fq.elements = fq.elements[:, ::-1].copy()
        fq.ref_points = fq.ref_points[:, ::-1].copy()
        fq.normals = -fq.normals
    return fq


def face_jump(field: StressField, face: int, s=None, swap: bool = False) -> np.ndarray:
    """
    [[tau]] on one face of F_h*, sampled at edge parameters s in [0, 1]
    (default: Gauss points). `swap` enumerates the neighbours in reverse order.
    """
    jump, _ = face_traces(field, _single_face(field, face, s, swap))
    return jump[0]


def face_average_kdiv(field: StressField, face: int, s=None, swap: bool = False) -> np.ndarray:
    """{kappa div tau} on one face of F_h*, sampled like face_jump."""
    _, avg = face_traces(field, _single_face(field, face, s, swap))
    return avg[0]


__all__ = [
    "QuadratureOrders", "FaceQuadrature", "face_quadrature", "StressSpace", "StressField",
    "PiecewiseVectorField", "project_local", "l2_project_vector", "face_traces", "face_jump",
    "face_average_kdiv", "deviatoric", "trace", "INTERIOR", "NEUMANN",
]
