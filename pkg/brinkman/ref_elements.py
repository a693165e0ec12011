"""
Reference-triangle bases.

ScalarBasis is a hierarchical orthonormal basis of P_k on the reference
triangle, obtained by orthonormalising barycentre-centred monomials ordered
by total degree. The reference mass matrix is the identity, so on an affine
element K the mass matrix is |det J_K| times the identity.

SymTensorBasis extends it to symmetric 2x2 tensors, component-major:
the xx block, then the xy (= yx) block, then the yy block.
"""
import numpy as np

from .errors import ConfigError
from .quadrature import triangle_rule


MAX_DEGREE = 4

# Unit symmetric tensors for the xx, xy and yy components
TENSOR_UNITS = np.array([
    [[1.0, 0.0], [0.0, 0.0]],
    [[0.0, 1.0], [1.0, 0.0]],
    [[0.0, 0.0], [0.0, 1.0]],
])

_CENTRE = 1.0 / 3.0


def deviatoric(tensors: np.ndarray) -> np.ndarray:
    """tau^D = tau - (1/2) tr(tau) I over the last two axes."""
    tr = np.trace(tensors, axis1=-2, axis2=-1)
    return tensors - 0.5 * tr[..., None, None] * np.eye(2)


def trace(tensors: np.ndarray) -> np.ndarray:
    return np.trace(tensors, axis1=-2, axis2=-1)


def monomial_exponents(degree: int) -> list:
    """(a, b) pairs of x^a y^b ordered by total degree."""
    return [(d - b, b) for d in range(degree + 1) for b in range(d + 1)]


def _monomials(points, exponents):
    X = points[..., 0:1] - _CENTRE
    Y = points[..., 1:2] - _CENTRE
    a = np.array([e[0] for e in exponents])
    b = np.array([e[1] for e in exponents])
    return np.power(X, a) * np.power(Y, b)


def _monomial_gradients(points, exponents):
    X = points[..., 0:1] - _CENTRE
    Y = points[..., 1:2] - _CENTRE
    a = np.array([e[0] for e in exponents])
    b = np.array([e[1] for e in exponents])
    dx = a * np.power(X, np.maximum(a - 1, 0)) * np.power(Y, b)
    dy = b * np.power(X, a) * np.power(Y, np.maximum(b - 1, 0))
    return np.stack([dx, dy], axis=-1)


class ScalarBasis:
    """
    Orthonormal basis of P_degree on the reference triangle.

    Degree 0 is allowed here since piecewise-constant spaces are needed for
    multipliers and projections; the public factory scalar_basis() enforces
    the 1..4 range of the stress space.
    """

    def __init__(self, degree: int):
        if not isinstance(degree, (int, np.integer)) or not 0 <= degree <= MAX_DEGREE:
            raise ConfigError(f"Polynomial degree must be in 0..{MAX_DEGREE}, got {degree!r}")
        self.degree = int(degree)
        self.exponents = monomial_exponents(self.degree)
        self.dim = len(self.exponents)
        self._coeffs = self._orthonormalise()

    def _orthonormalise(self) -> np.ndarray:
        rule = triangle_rule(2 * self.degree)
        m = _monomials(rule.points, self.exponents)
        gram = np.einsum('q,qi,qj->ij', rule.weights, m, m)
        coeffs = np.eye(self.dim)
        # Two passes of Cholesky-based Gram–Schmidt keep the result orthonormal to round-off
        for _ in range(2):
            g = coeffs @ gram @ coeffs.T
            L = np.linalg.cholesky(g)
            coeffs = np.linalg.solve(L, coeffs)
        return coeffs

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Values at reference points (..., 2) -> (..., dim)."""
        points = np.asarray(points, dtype=float)
        return _monomials(points, self.exponents) @ self._coeffs.T

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients at points (..., 2) -> (..., dim, 2)."""
        points = np.asarray(points, dtype=float)
        g = _monomial_gradients(points, self.exponents)
        return np.einsum('ij,...jd->...id', self._coeffs, g)

    def mass_matrix(self) -> np.ndarray:
        rule = triangle_rule(2 * self.degree)
        v = self.eval(rule.points)
        return np.einsum('q,qi,qj->ij', rule.weights, v, v)


class SymTensorBasis:
    """Symmetric-tensor extension of a ScalarBasis (dimension 3 * dim P_k)."""

    def __init__(self, degree: int):
        self.scalar = ScalarBasis(degree)
        self.degree = self.scalar.degree
        self.scalar_dim = self.scalar.dim
        self.dim = 3 * self.scalar_dim

    def component(self, i: int) -> int:
        """Tensor component (0=xx, 1=xy, 2=yy) of basis function i."""
        return i // self.scalar_dim

    def values(self, points: np.ndarray) -> np.ndarray:
        """Tensor values at reference points (..., 2) -> (..., dim, 2, 2)."""
        phi = self.scalar.eval(points)
        vals = phi[..., None, :, None, None] * TENSOR_UNITS[:, None, :, :]
        return vals.reshape(phi.shape[:-1] + (self.dim, 2, 2))

    def divergence(self, gradients: np.ndarray) -> np.ndarray:
        """
        Row-wise divergence from scalar gradients.

        Args:
            gradients: Scalar basis gradients (..., scalar_dim, 2), already
                mapped to physical coordinates when needed

        Returns:
            (..., dim, 2) divergence of each tensor basis function
        """
        gx = gradients[..., 0]
        gy = gradients[..., 1]
        zero = np.zeros_like(gx)
        xx = np.stack([gx, zero], axis=-1)
        xy = np.stack([gy, gx], axis=-1)
        yy = np.stack([zero, gy], axis=-1)
        return np.concatenate([xx, xy, yy], axis=-2)

    def reference_divergence(self, points: np.ndarray) -> np.ndarray:
        return self.divergence(self.scalar.grad(points))

    def deviatoric_values(self, points: np.ndarray) -> np.ndarray:
        return deviatoric(self.values(points))

    def trace_values(self, points: np.ndarray) -> np.ndarray:
        return trace(self.values(points))


def _check_stress_degree(k):
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_DEGREE:
        raise ConfigError(f"Stress degree k must be in 1..{MAX_DEGREE}, got {k!r}")


def scalar_basis(k: int) -> ScalarBasis:
    _check_stress_degree(k)
    return ScalarBasis(k)


def sym_tensor_basis(k: int) -> SymTensorBasis:
    _check_stress_degree(k)
    return SymTensorBasis(k)
