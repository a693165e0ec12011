"""
Quadrature rules on the reference triangle and the reference edge.

Reference triangle: vertices (0,0), (1,0), (0,1), measure 1/2.
Reference edge: the unit interval [0,1], measure 1.

Triangle rules are collapsed (conical product) Gauss rules: Gauss–Legendre
in the first direction and Gauss–Jacobi with weight (1-t) in the second,
which gives exactness for every polynomial of total degree <= 2n-1 with
n points per direction.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from .errors import QuadratureError


# Highest exactness degree served by triangle_rule/edge_rule
MAX_DEGREE = 20


@dataclass(frozen=True)
class QuadratureRule:
    """Points, weights and declared exactness of a quadrature rule."""
    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Apply the rule to values sampled at the points (first axis)."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _points_per_direction(degree: int) -> int:
    if not isinstance(degree, (int, np.integer)) or degree < 0 or degree > MAX_DEGREE:
        raise QuadratureError(f"Unsupported quadrature degree {degree!r} (0..{MAX_DEGREE})")
    return max(1, (int(degree) + 2) // 2)


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadratureRule:
    """Gauss–Legendre rule on [0,1] exact for polynomials of the given degree."""
    n = _points_per_direction(degree)
    x, w = leggauss(n)
    points = 0.5 * (x + 1.0)
    weights = 0.5 * w
    points.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(points, weights, int(degree))


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """
    Collapsed Gauss rule on the reference triangle.

    Args:
        degree: Total polynomial degree integrated exactly (0..20)

    Returns:
        QuadratureRule with points of shape (n, 2)
    """
    n = _points_per_direction(degree)
    xs, ws = leggauss(n)
    s = 0.5 * (xs + 1.0)
    ws = 0.5 * ws

    # Gauss–Jacobi(1, 0) absorbs the (1 - t) Jacobian of the collapse
    xt, wt = roots_jacobi(n, 1.0, 0.0)
    t = 0.5 * (xt + 1.0)
    wt = 0.25 * wt

    S, T = np.meshgrid(s, t, indexing="ij")
    WS, WT = np.meshgrid(ws, wt, indexing="ij")
    points = np.column_stack([(S * (1.0 - T)).ravel(), T.ravel()])
    weights = (WS * WT).ravel()
    points.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(points, weights, int(degree))
