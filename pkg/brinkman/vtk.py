"""
Legacy VTK (2.0, ASCII) export of a solution on its triangle mesh.

Discontinuous fields are written as cell data sampled at element
centroids; the divergence-free velocity is also written as point data
averaged over the elements sharing each vertex.
"""
import logging
from pathlib import Path

import numpy as np

from .mesh import Mesh


logger = logging.getLogger(__name__)

VTK_TRIANGLE = 5

CENTROID = np.array([[1.0 / 3.0, 1.0 / 3.0]])
CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _format_rows(array: np.ndarray) -> list:
    array = np.atleast_2d(np.asarray(array, dtype=float).T).T
    return [" ".join(f"{v:.10g}" for v in row) for row in array]


def _attribute(name: str, texture: str, array: np.ndarray) -> list:
    if texture == "VECTORS":
        vectors = np.column_stack([array, np.zeros(len(array))])
        return [f"VECTORS {name} double"] + _format_rows(vectors)
    return [f"SCALARS {name} double 1", "LOOKUP_TABLE default"] + _format_rows(array)


def solution_cell_data(solution) -> list:
    """[{name, texture, array}] entries for every field of a Solution."""
    sigma = solution.sigma.values(CENTROID)[:, 0]
    cell_data = [
        {"name": "sigma_xx", "texture": "SCALARS", "array": sigma[:, 0, 0]},
        {"name": "sigma_xy", "texture": "SCALARS", "array": sigma[:, 0, 1]},
        {"name": "sigma_yy", "texture": "SCALARS", "array": sigma[:, 1, 1]},
        {"name": "p_h", "texture": "SCALARS", "array": solution.pressure.values(CENTROID)[:, 0]},
        {"name": "kappa", "texture": "SCALARS", "array": solution.mesh.kappa},
    ]
    if solution.velocity is not None:
        cell_data.append({"name": "u_h", "texture": "VECTORS",
                          "array": solution.velocity.values(CENTROID)[:, 0]})
    if solution.reconstruction is not None:
        cell_data.append({"name": "u_star", "texture": "VECTORS",
                          "array": solution.reconstruction.values(CENTROID)[:, 0]})
    return cell_data


def solution_point_data(solution) -> list:
    if solution.reconstruction is None:
        return []
    mesh = solution.mesh
    corner_values = solution.reconstruction.values(CORNERS)
    sums = np.zeros((mesh.num_vertices, 2))
    counts = np.zeros(mesh.num_vertices)
    np.add.at(sums, mesh.triangles.ravel(), corner_values.reshape(-1, 2))
    np.add.at(counts, mesh.triangles.ravel(), 1.0)
    return [{"name": "u_star", "texture": "VECTORS", "array": sums / counts[:, None]}]


def write_vtk(path, mesh: Mesh, cell_data: list, point_data=(), title: str = "brinkman-dg") -> Path:
    """
    Write an unstructured triangle grid with cell and point attributes.

    Args:
        cell_data: list of {"name", "texture" (SCALARS|VECTORS), "array"}
        point_data: same layout, one value per vertex
    """
    path = Path(path)
    ne = mesh.num_elements
    lines = ["# vtk DataFile Version 2.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.num_vertices} double"]
    lines += _format_rows(np.column_stack([mesh.vertices, np.zeros(mesh.num_vertices)]))
    lines.append(f"CELLS {ne} {4 * ne}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {ne}")
    lines += [str(VTK_TRIANGLE)] * ne
    if cell_data:
        lines.append(f"CELL_DATA {ne}")
        for entry in cell_data:
            lines += _attribute(entry["name"], entry["texture"], entry["array"])
    if point_data:
        lines.append(f"POINT_DATA {mesh.num_vertices}")
        for entry in point_data:
            lines += _attribute(entry["name"], entry["texture"], entry["array"])
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote {path} ({ne} cells, {len(cell_data)} cell fields)")
    return path


def write_solution(path, solution) -> Path:
    return write_vtk(path, solution.mesh, solution_cell_data(solution), solution_point_data(solution))
