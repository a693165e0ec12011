"""
Triangle meshes aligned with a permeability partition.

A Mesh holds vertices, positively oriented triangles, per-element subdomain
ids and permeabilities, and the full face topology:

    faces[f]          vertex pair (a, b) with a < b
    face_elements[f]  (K, K') with K < K'; K' = -1 on boundary faces
    face_local[f]     local edge index of the face in K and K'
    face_normals[f]   unit normal, outward from K (the lower element id)
    face_tags[f]      INTERIOR, DIRICHLET or NEUMANN

Local edge i of a triangle (v0, v1, v2) is the edge opposite vertex i.
Meshes are immutable; the with_*/classify/set_* helpers return new meshes.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import MeshError


logger = logging.getLogger(__name__)

INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2

TAG_NAMES = {INTERIOR: "interior", DIRICHLET: "dirichlet", NEUMANN: "neumann"}

# Tolerance for coordinate tests on the unit square
GEOMETRY_TOL = 1e-12


@dataclass(frozen=True)
class BoundarySpec:
    """
    Dirichlet/Neumann split of the boundary.

    `dirichlet` maps an (n, 2) array of boundary points to a boolean array;
    every boundary point not flagged Dirichlet is Neumann.
    """
    name: str
    dirichlet: Callable[[np.ndarray], np.ndarray]

    def theta(self, mesh: "Mesh") -> int:
        """1 iff no Neumann faces remain once `mesh` is classified with this spec."""
        tags = self.tags_for(mesh)
        return int(not np.any(tags == NEUMANN))

    def tags_for(self, mesh: "Mesh") -> np.ndarray:
        bnd = mesh.boundary_faces
        a = mesh.vertices[mesh.faces[bnd, 0]]
        b = mesh.vertices[mesh.faces[bnd, 1]]
        probes = [np.asarray(self.dirichlet(a + t * (b - a)), dtype=bool) for t in (0.25, 0.5, 0.75)]
        straddle = (probes[0] != probes[1]) | (probes[1] != probes[2])
        if np.any(straddle):
            f = bnd[np.argmax(straddle)]
            raise MeshError(f"Boundary face {f} straddles the Dirichlet/Neumann split of '{self.name}'")
        tags = np.full(mesh.num_faces, INTERIOR, dtype=np.int8)
        tags[bnd] = np.where(probes[1], DIRICHLET, NEUMANN)
        return tags


def _on_left_or_top(points):
    return (points[:, 0] <= GEOMETRY_TOL) | (points[:, 1] >= 1.0 - GEOMETRY_TOL)


def _not_right(points):
    return points[:, 0] < 1.0 - GEOMETRY_TOL


# Dirichlet on the left and top sides of the unit square, Neumann elsewhere
MIXED_BOUNDARY = BoundarySpec("mixed", _on_left_or_top)
ALL_DIRICHLET = BoundarySpec("all-dirichlet", lambda p: np.ones(len(p), dtype=bool))
# Inlet and walls Dirichlet, traction-free outlet on x = 1
CHANNEL_BOUNDARY = BoundarySpec("channel", _not_right)

BOUNDARY_LAYOUTS = {spec.name: spec for spec in (MIXED_BOUNDARY, ALL_DIRICHLET, CHANNEL_BOUNDARY)}


class Mesh:
    """
    Immutable 2D triangle mesh with face topology.

    Args:
        vertices: (nv, 2) coordinates
        triangles: (ne, 3) vertex indices; reoriented counter-clockwise if needed
        subdomains: optional (ne,) subdomain ids (default 0)
        kappa: optional (ne,) permeabilities (default 1)
        boundary: optional BoundarySpec used to tag boundary faces
            (default: all boundary faces Dirichlet)
    """

    def __init__(self, vertices, triangles, subdomains=None, kappa=None,
                 boundary: Optional[BoundarySpec] = None):
        vertices = np.array(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (n, 2)")
        if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
            raise MeshError("triangles must have shape (m, 3) with m >= 1")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshError("triangle connectivity references unknown vertices")

        signed = _signed_areas(vertices, triangles)
        if np.any(np.abs(signed) <= GEOMETRY_TOL):
            raise MeshError("mesh contains degenerate triangles")
        flip = signed < 0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]

        ne = len(triangles)
        subdomains = np.zeros(ne, dtype=np.int64) if subdomains is None else np.array(subdomains, dtype=np.int64)
        kappa = np.ones(ne) if kappa is None else np.array(kappa, dtype=float)
        if subdomains.shape != (ne,) or kappa.shape != (ne,):
            raise MeshError("subdomains and kappa need one value per element")
        if np.any(~np.isfinite(kappa)) or np.any(kappa <= 0):
            raise MeshError("permeability must be positive on every element")

        self.vertices = vertices
        self.triangles = triangles
        self.subdomains = subdomains
        self.kappa = kappa
        self._build_geometry()
        self._build_faces()

        self.boundary = boundary
        if boundary is None:
            tags = np.full(self.num_faces, INTERIOR, dtype=np.int8)
            tags[self.boundary_faces] = DIRICHLET
        else:
            tags = boundary.tags_for(self)
            if not np.any(tags == DIRICHLET):
                raise MeshError(f"Boundary layout '{boundary.name}' leaves no Dirichlet faces")
        self.face_tags = tags

        for arr in (self.vertices, self.triangles, self.subdomains, self.kappa, self.face_tags):
            arr.flags.writeable = False

    # --- Construction helpers ---

    def _build_geometry(self):
        v = self.vertices[self.triangles]
        self.origins = v[:, 0, :]
        self.jacobians = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        self.det_jacobians = np.linalg.det(self.jacobians)
        self.areas = 0.5 * self.det_jacobians
        self.inverse_jacobians = np.linalg.inv(self.jacobians)
        self.inverse_transposed = np.transpose(self.inverse_jacobians, (0, 2, 1))
        edges = np.stack([v[:, 2] - v[:, 1], v[:, 0] - v[:, 2], v[:, 1] - v[:, 0]], axis=1)
        self.edge_lengths = np.linalg.norm(edges, axis=-1)
        self.diameters = self.edge_lengths.max(axis=1)
        self.centroids = v.mean(axis=1)
        for arr in (self.origins, self.jacobians, self.det_jacobians, self.areas,
                    self.inverse_jacobians, self.inverse_transposed, self.edge_lengths,
                    self.diameters, self.centroids):
            arr.flags.writeable = False

    def _build_faces(self):
        ne = len(self.triangles)
        t = self.triangles
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        keys = np.sort(local, axis=1)
        owner = np.repeat(np.arange(ne), 3)
        edge_index = np.tile(np.arange(3), ne)

        order = np.lexsort((owner, keys[:, 1], keys[:, 0]))
        sorted_keys = keys[order]
        new_face = np.ones(len(order), dtype=bool)
        new_face[1:] = np.any(sorted_keys[1:] != sorted_keys[:-1], axis=1)
        face_of_sorted = np.cumsum(new_face) - 1
        nf = int(face_of_sorted[-1]) + 1

        counts = np.bincount(face_of_sorted, minlength=nf)
        if np.any(counts > 2):
            raise MeshError("non-manifold mesh: an edge is shared by more than two triangles")

        first = np.flatnonzero(new_face)
        faces = sorted_keys[first]
        face_elements = np.full((nf, 2), -1, dtype=np.int64)
        face_local = np.full((nf, 2), -1, dtype=np.int64)
        face_elements[:, 0] = owner[order[first]]
        face_local[:, 0] = edge_index[order[first]]
        second = first[counts == 2] + 1
        face_elements[counts == 2, 1] = owner[order[second]]
        face_local[counts == 2, 1] = edge_index[order[second]]

        element_faces = np.empty(3 * ne, dtype=np.int64)
        element_faces[order] = face_of_sorted
        element_faces = element_faces.reshape(ne, 3)

        a = self.vertices[faces[:, 0]]
        b = self.vertices[faces[:, 1]]
        lengths = np.linalg.norm(b - a, axis=1)
        tangent = (b - a) / lengths[:, None]
        normals = np.column_stack([tangent[:, 1], -tangent[:, 0]])
        # Orient outward from the first (lower-id) element
        inward = np.einsum('fd,fd->f', normals, self.centroids[face_elements[:, 0]] - 0.5 * (a + b)) > 0
        normals[inward] *= -1.0

        signs = np.where(face_elements[element_faces, 0] == np.arange(ne)[:, None], 1.0, -1.0)

        self.faces = faces
        self.face_elements = face_elements
        self.face_local = face_local
        self.face_lengths = lengths
        self.face_normals = normals
        self.face_midpoints = 0.5 * (a + b)
        self.element_faces = element_faces
        self.element_face_signs = signs
        for arr in (faces, face_elements, face_local, lengths, normals, self.face_midpoints,
                    element_faces, signs):
            arr.flags.writeable = False

    # --- Sizes and face sets ---

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_elements(self) -> int:
        return len(self.triangles)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_elements[:, 1] >= 0)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_elements[:, 1] < 0)

    @property
    def dirichlet_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_tags == DIRICHLET)

    @property
    def neumann_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_tags == NEUMANN)

    @property
    def dg_faces(self) -> np.ndarray:
        """F_h* = interior faces and Neumann faces."""
        return np.flatnonzero(self.face_tags != DIRICHLET)

    @property
    def theta(self) -> int:
        return int(len(self.neumann_faces) == 0)

    @property
    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_faces + self.num_elements

    @property
    def inradii(self) -> np.ndarray:
        return 2.0 * self.areas / self.edge_lengths.sum(axis=1)

    @property
    def shape_regularity(self) -> float:
        return float(np.max(self.diameters / self.inradii))

    def face_gamma_inverse(self, faces=None) -> np.ndarray:
        """
        1 / gamma_F, with gamma_F = min(1/kappa_K, 1/kappa_K') on interior
        faces and 1/kappa_K on boundary faces.
        """
        faces = np.arange(self.num_faces) if faces is None else np.asarray(faces)
        fe = self.face_elements[faces]
        k0 = self.kappa[fe[:, 0]]
        k1 = np.where(fe[:, 1] >= 0, self.kappa[np.maximum(fe[:, 1], 0)], k0)
        return np.maximum(k0, k1)

    # --- Maps ---

    def to_physical(self, ref_points: np.ndarray, elements=None) -> np.ndarray:
        """Map reference points (nq, 2) to every (or the given) element: (ne, nq, 2)."""
        elements = slice(None) if elements is None else elements
        return self.origins[elements][:, None, :] + np.einsum('kab,qb->kqa', self.jacobians[elements], ref_points)

    def to_reference(self, points: np.ndarray, elements: np.ndarray) -> np.ndarray:
        """Pull physical points (n, nq, 2) back to the reference triangle of elements (n,)."""
        return np.einsum('kab,kqb->kqa', self.inverse_jacobians[elements],
                         points - self.origins[elements][:, None, :])

    # --- Derived meshes ---

    def _replace(self, **changes) -> "Mesh":
        args = dict(vertices=self.vertices, triangles=self.triangles, subdomains=self.subdomains,
                    kappa=self.kappa, boundary=self.boundary)
        args.update(changes)
        return Mesh(**args)

    def with_boundary(self, spec: BoundarySpec) -> "Mesh":
        return self._replace(boundary=spec)

    def with_kappa(self, kappa) -> "Mesh":
        return self._replace(kappa=kappa)

    def with_subdomains(self, subdomains) -> "Mesh":
        return self._replace(subdomains=subdomains)

    def __repr__(self):
        return (f"Mesh({self.num_elements} triangles, {self.num_vertices} vertices, "
                f"{self.num_faces} faces, h={self.h:.3f})")


def _signed_areas(vertices, triangles):
    v = vertices[triangles]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _check_size(n):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise MeshError(f"grid size must be a positive integer, got {n!r}")


def _grid_vertices(n):
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def _cell_corners(n):
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i = i.ravel()
    j = j.ravel()
    v00 = j * (n + 1) + i
    return v00, v00 + 1, v00 + n + 2, v00 + n + 1


# --- Generators ---

def diagonal_grid(n: int) -> Mesh:
    """Unit square, n x n cells each split along the (i,j)-(i+1,j+1) diagonal."""
    _check_size(n)
    v00, v10, v11, v01 = _cell_corners(n)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(_grid_vertices(n), triangles)


def crisscross_grid(n: int) -> Mesh:
    """Unit square, n x n cells each split into four triangles by both diagonals."""
    _check_size(n)
    corners = _grid_vertices(n)
    v00, v10, v11, v01 = _cell_corners(n)
    centres = 0.5 * (corners[v00] + corners[v11])
    c = len(corners) + np.arange(n * n)
    triangles = np.stack([
        np.column_stack([v00, v10, c]),
        np.column_stack([v10, v11, c]),
        np.column_stack([v11, v01, c]),
        np.column_stack([v01, v00, c]),
    ], axis=1).reshape(-1, 3)
    return Mesh(np.vstack([corners, centres]), triangles)


def barycentric_trisect(m: Mesh) -> Mesh:
    """Split every triangle into three by joining its barycentre to its vertices."""
    ne = m.num_elements
    g = m.num_vertices + np.arange(ne)
    t = m.triangles
    triangles = np.stack([
        np.column_stack([t[:, 0], t[:, 1], g]),
        np.column_stack([t[:, 1], t[:, 2], g]),
        np.column_stack([t[:, 2], t[:, 0], g]),
    ], axis=1).reshape(-1, 3)
    return Mesh(np.vstack([m.vertices, m.centroids]), triangles,
                subdomains=np.repeat(m.subdomains, 3), kappa=np.repeat(m.kappa, 3),
                boundary=m.boundary)


MESH_FAMILIES = {
    "diagonal": diagonal_grid,
    "crisscross": crisscross_grid,
    "trisect": lambda n: barycentric_trisect(diagonal_grid(n)),
}


# --- Boundary and permeability ---

def classify_boundary(m: Mesh, spec: BoundarySpec) -> Mesh:
    """Tag boundary faces Dirichlet/Neumann according to `spec`."""
    classified = m.with_boundary(spec)
    logger.debug(f"Boundary '{spec.name}': {len(classified.dirichlet_faces)} Dirichlet, "
                 f"{len(classified.neumann_faces)} Neumann faces, theta={classified.theta}")
    return classified


def assign_subdomains(m: Mesh, classifier: Callable[[np.ndarray], np.ndarray]) -> Mesh:
    """
    Set subdomain ids from a point classifier and check mesh alignment.

    Every element is probed at its centroid and at points pulled slightly
    inside from each vertex; an element whose probes disagree straddles the
    partition and is rejected.
    """
    v = m.vertices[m.triangles]
    c = m.centroids
    ids = np.asarray(classifier(c), dtype=np.int64)
    for corner in range(3):
        probe = np.asarray(classifier(0.9 * v[:, corner] + 0.1 * c), dtype=np.int64)
        bad = probe != ids
        if np.any(bad):
            raise MeshError(f"element {int(np.argmax(bad))} straddles the permeability partition")
    return m.with_subdomains(ids)


def set_permeability(m: Mesh, field) -> Mesh:
    """
    Set kappa per element.

    Args:
        field: a positive scalar, an (ne,) array of per-element values,
            a dict {subdomain id: value}, or a callable on (ne, 2) centroids
    """
    if callable(field):
        kappa = np.asarray(field(m.centroids), dtype=float)
    elif isinstance(field, dict):
        missing = set(np.unique(m.subdomains).tolist()) - set(field)
        if missing:
            raise MeshError(f"no permeability given for subdomains {sorted(missing)}")
        kappa = np.array([field[s] for s in m.subdomains], dtype=float)
    else:
        kappa = np.asarray(field, dtype=float)
        if kappa.ndim == 0:
            kappa = np.full(m.num_elements, float(kappa))
    if kappa.shape != (m.num_elements,):
        raise MeshError("permeability field needs one value per element")
    if np.any(~np.isfinite(kappa)) or np.any(kappa <= 0):
        raise MeshError("permeability values must be positive")
    return m.with_kappa(kappa)


# --- ASCII interchange format ---

def write_mesh(m: Mesh, path) -> None:
    """
    Write the ASCII mesh format:

        vertices <n>
        x y                      (n lines)
        triangles <m>
        a b c kappa subdomain    (m lines)
    """
    path = Path(path)
    lines = [f"vertices {m.num_vertices}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in m.vertices]
    lines.append(f"triangles {m.num_elements}")
    lines += [f"{a} {b} {c} {k:.17g} {s}" for (a, b, c), k, s in zip(m.triangles, m.kappa, m.subdomains)]
    path.write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Read the ASCII format written by write_mesh (kappa and subdomain columns optional)."""
    path = Path(path)
    rows = [line.split() for line in path.read_text().splitlines()]
    rows = [r for r in rows if r and not r[0].startswith('#')]
    try:
        if rows[0][0] != "vertices":
            raise MeshError(f"{path}: expected 'vertices <n>' header")
        nv = int(rows[0][1])
        vertices = np.array([[float(r[0]), float(r[1])] for r in rows[1:1 + nv]])
        header = rows[1 + nv]
        if header[0] != "triangles":
            raise MeshError(f"{path}: expected 'triangles <m>' header")
        nt = int(header[1])
        body = rows[2 + nv:2 + nv + nt]
        if len(vertices) != nv or len(body) != nt:
            raise MeshError(f"{path}: truncated mesh file")
        triangles = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in body])
        kappa = np.array([float(r[3]) if len(r) > 3 else 1.0 for r in body])
        subdomains = np.array([int(r[4]) if len(r) > 4 else 0 for r in body])
    except (IndexError, ValueError) as e:
        if isinstance(e, MeshError):
            raise
        raise MeshError(f"{path}: malformed mesh file ({e})") from e
    return Mesh(vertices, triangles, subdomains=subdomains, kappa=kappa)
