"""
Sparse symmetric operators and the solvers used by the DG scheme and its
post-processing.

The global trace term theta (tr sigma, 1)(tr tau, 1) is a dense rank-one
update t t^T. It never enters the sparse matrix: matrix-vector products add
(t.x) t, and direct solves border the matrix with t instead.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, SolverError


logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12

PRECONDITIONERS = ("block-jacobi", "jacobi", "none")

MAX_RESTARTS = 3

# Cap on inner mass-matrix CG iterations of the Schur solver
INNER_MAXIT = 1000

# Outer Schur residual accepted when inexact inner solves keep it above tol
SCHUR_ACCEPT_TOL = 1e-8

# Relative tolerance of the Schur solve inside project_onto_constraint
PROJECTION_TOL = 1e-12
PROJECTION_MAXIT = 200


class SparseSymmetric:
    """
    Symmetric sparse matrix with an optional rank-one augmentation.

    Args:
        matrix: square scipy sparse matrix
        rank_one: optional vector t; the operator is A + t t^T
        block_size: size of the contiguous diagonal blocks used by the
            block-Jacobi preconditioner (dofs per element for DG matrices)
    """

    def __init__(self, matrix, rank_one: Optional[np.ndarray] = None, block_size: Optional[int] = None):
        matrix = sp.csr_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise SolverError(f"matrix must be square, got {matrix.shape}")
        self.matrix = matrix
        self.rank_one = None if rank_one is None else np.asarray(rank_one, dtype=float)
        self.block_size = block_size

    @property
    def ndofs(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.matrix @ x
        if self.rank_one is not None:
            y = y + (self.rank_one @ x) * self.rank_one
        return y

    __matmul__ = matvec

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.matvec, dtype=float)

    def to_dense(self) -> np.ndarray:
        dense = self.matrix.toarray()
        if self.rank_one is not None:
            dense += np.outer(self.rank_one, self.rank_one)
        return dense

    def asymmetry(self) -> float:
        """max |A - A^T| / max |A| of the sparse part."""
        diff = abs(self.matrix - self.matrix.T)
        scale = abs(self.matrix).max()
        return float(diff.max() / scale) if scale > 0 else 0.0

    def diagonal_blocks(self) -> np.ndarray:
        """Dense diagonal blocks (nb, bs, bs), including the rank-one contribution."""
        bs = self.block_size
        if bs is None or self.ndofs % bs:
            raise SolverError("block-Jacobi needs a block size dividing the matrix dimension")
        nb = self.ndofs // bs
        coo = self.matrix.tocoo()
        keep = (coo.row // bs) == (coo.col // bs)
        blocks = np.zeros((nb, bs, bs))
        np.add.at(blocks, (coo.row[keep] // bs, coo.row[keep] % bs, coo.col[keep] % bs), coo.data[keep])
        if self.rank_one is not None:
            t = self.rank_one.reshape(nb, bs)
            blocks += np.einsum('bi,bj->bij', t, t)
        return blocks

    def preconditioner(self, kind: str = "block-jacobi"):
        """Return a function r -> M^{-1} r."""
        if kind == "none":
            return lambda r: r
        if kind == "jacobi":
            diag = self.matrix.diagonal().copy()
            if self.rank_one is not None:
                diag += self.rank_one ** 2
            if np.any(diag <= 0):
                raise SolverError("Jacobi preconditioner needs a positive diagonal")
            inv = 1.0 / diag
            return lambda r: inv * r
        if kind == "block-jacobi":
            bs = self.block_size
            try:
                inv = np.linalg.inv(self.diagonal_blocks())
            except np.linalg.LinAlgError as e:
                raise SolverError(f"singular diagonal block in block-Jacobi preconditioner: {e}") from e
            nb = len(inv)
            return lambda r: np.einsum('bij,bj->bi', inv, r.reshape(nb, bs)).ravel()
        raise SolverError(f"Unknown preconditioner '{kind}' (choose from {', '.join(PRECONDITIONERS)})")


@dataclass
class CGResult:
    """Outcome of cg_solve; `energy` holds J(x_k) = x.Ax/2 - b.x per iteration."""
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    residuals: list = field(default_factory=list)
    energy: list = field(default_factory=list)


def cg_solve(A, b: np.ndarray, tol: float = DEFAULT_TOL, maxit: Optional[int] = None,
             preconditioner: str = "block-jacobi", x0: Optional[np.ndarray] = None,
             raise_on_failure: bool = True) -> CGResult:
    """
    Preconditioned conjugate gradients.

    Args:
        A: SparseSymmetric (or anything with matvec and preconditioner)
        b: right-hand side
        tol: relative residual target ||b - Ax|| / ||b||
        maxit: iteration cap (default 10 * n)
        preconditioner: 'block-jacobi', 'jacobi' or 'none'
        raise_on_failure: raise ConvergenceError when tol is not reached

    Returns:
        CGResult with the final true relative residual
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxit = 10 * n if maxit is None else maxit
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0, True, [0.0], [0.0])

    apply_m = A.preconditioner(preconditioner)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    residuals = []
    energy = []
    k = 0
    true_residual = np.inf
    # Restart from the true residual when the recursive one has drifted
    for _ in range(MAX_RESTARTS + 1):
        r = b - A.matvec(x)
        true_residual = float(np.linalg.norm(r) / bnorm)
        if true_residual <= tol or k >= maxit:
            break
        z = apply_m(r)
        d = z.copy()
        rz = r @ z
        residuals.append(true_residual)
        energy.append(-0.5 * x @ (b + r))
        while residuals[-1] > tol and k < maxit:
            Ad = A.matvec(d)
            curvature = d @ Ad
            if curvature <= 0:
                raise SolverError(f"CG breakdown: non-positive curvature {curvature:.3e} at iteration {k}")
            alpha = rz / curvature
            x += alpha * d
            r -= alpha * Ad
            z = apply_m(r)
            rz_new = r @ z
            d = z + (rz_new / rz) * d
            rz = rz_new
            k += 1
            residuals.append(np.linalg.norm(r) / bnorm)
            energy.append(-0.5 * x @ (b + r))

    true_residual = float(np.linalg.norm(b - A.matvec(x)) / bnorm)
    converged = true_residual <= tol
    logger.debug(f"CG ({preconditioner}): {k} iterations, relative residual {true_residual:.3e}")
    if not converged and raise_on_failure:
        logger.warning("CG did not converge; the penalty parameter may be too small")
        raise ConvergenceError("CG did not converge", true_residual, k)
    return CGResult(x, k, true_residual, converged, residuals, energy)


def direct_solve(A: SparseSymmetric, b: np.ndarray) -> np.ndarray:
    """
    Sparse LU solve of (A + t t^T) x = b.

    With a rank-one term the system is bordered:
        [A   t] [x]   [b]
        [t^T -1] [s] = [0]
    which stays sparse and is regular even when A alone is singular.
    """
    b = np.asarray(b, dtype=float)
    if A.rank_one is None:
        M = A.matrix.tocsc()
        rhs = b
    else:
        t = sp.csr_matrix(A.rank_one[:, None])
        M = sp.bmat([[A.matrix, t], [t.T, sp.csr_matrix([[-1.0]])]], format="csc")
        rhs = np.append(b, 0.0)
    try:
        x = spla.splu(M).solve(rhs)
    except RuntimeError as e:
        raise SolverError(f"sparse LU failed: {e}") from e
    if not np.all(np.isfinite(x)):
        raise SolverError("sparse LU produced non-finite values")
    return x[:A.ndofs]


def dense_min_eigenvalue(A) -> float:
    """Smallest eigenvalue of a (small) symmetric operator, densified."""
    dense = A.to_dense() if hasattr(A, "to_dense") else np.asarray(A)
    return float(sla.eigvalsh(dense, subset_by_index=[0, 0])[0])


# --- Saddle-point systems ---

@dataclass
class SaddleSystem:
    """
    [M  B^T] [u]   [f]
    [B   0 ] [l] = [g]

    M symmetric positive definite, B of full row rank.
    """
    M: sp.spmatrix
    B: sp.spmatrix
    f: np.ndarray
    g: Optional[np.ndarray] = None

    def __post_init__(self):
        self.M = sp.csr_matrix(self.M)
        self.B = sp.csr_matrix(self.B)
        if self.g is None:
            self.g = np.zeros(self.B.shape[0])

    def full_matrix(self) -> sp.csc_matrix:
        return sp.bmat([[self.M, self.B.T], [self.B, None]], format="csc")

    def residuals(self, u: np.ndarray, lam: np.ndarray):
        """Absolute residuals of both block rows."""
        r1 = self.f - self.M @ u - self.B.T @ lam
        r2 = self.g - self.B @ u
        return float(np.linalg.norm(r1)), float(np.linalg.norm(r2))


@dataclass
class SaddleResult:
    primal: np.ndarray
    multiplier: np.ndarray
    iterations: int = 0


def saddle_solve(S: SaddleSystem, tol: float = DEFAULT_TOL, method: str = "schur",
                 maxit: Optional[int] = None) -> SaddleResult:
    """
    Solve a SaddleSystem.

    'schur' runs CG on the multiplier Schur complement B M^{-1} B^T, with
    Jacobi-preconditioned inner CG solves of M. 'direct' factorises the
    full indefinite matrix.
    """
    if method == "direct":
        n = S.M.shape[0]
        try:
            sol = spla.splu(S.full_matrix()).solve(np.concatenate([S.f, S.g]))
        except RuntimeError as e:
            raise SolverError(f"saddle-point LU failed: {e}") from e
        return SaddleResult(sol[:n], sol[n:])
    if method != "schur":
        raise SolverError(f"Unknown saddle solver '{method}'")

    mass = SparseSymmetric(S.M)
    inner_tol = max(1e-2 * tol, 1e-14)

    def solve_mass(rhs):
        return cg_solve(mass, rhs, tol=inner_tol, maxit=INNER_MAXIT, preconditioner="jacobi",
                        raise_on_failure=False).x

    schur = _SchurComplement(S.B, solve_mass)
    rhs = S.B @ solve_mass(S.f) - S.g
    outer = cg_solve(schur, rhs, tol=tol, maxit=maxit, preconditioner="none", raise_on_failure=False)
    if outer.residual > max(tol, SCHUR_ACCEPT_TOL):
        raise ConvergenceError("Schur complement iteration stalled", outer.residual, outer.iterations)
    if not outer.converged:
        logger.debug(f"Schur CG stopped at {outer.residual:.2e} (inexact inner solves)")
    lam = outer.x
    u = solve_mass(S.f - S.B.T @ lam)
    u, lam = project_onto_constraint(S, u, lam)
    logger.info(f"Schur CG: {outer.iterations} outer iterations, "
                f"constraint residual {np.linalg.norm(S.B @ u - S.g):.3e}")
    return SaddleResult(u, lam, outer.iterations)


def project_onto_constraint(S: SaddleSystem, u: np.ndarray, lam: np.ndarray):
    """
    Move (u, lam) onto B u = g in the M inner product.

    u -= M^{-1} B^T d and lam += d with (B M^{-1} B^T) d = B u - g, so
    M u + B^T lam is unchanged and the first block residual is preserved.
    """
    defect = S.B @ u - S.g
    if not np.any(defect):
        return u, lam
    try:
        mass = spla.splu(S.M.tocsc())
    except RuntimeError as e:
        raise SolverError(f"mass matrix LU failed: {e}") from e
    shift = cg_solve(_SchurComplement(S.B, mass.solve), defect, tol=PROJECTION_TOL, maxit=PROJECTION_MAXIT,
                     preconditioner="none", raise_on_failure=False).x
    return u - mass.solve(S.B.T @ shift), lam + shift


class _SchurComplement:
    """Matrix-free B M^{-1} B^T."""

    def __init__(self, B, solve_mass):
        self.B = B
        self.solve_mass = solve_mass

    def matvec(self, x):
        return self.B @ self.solve_mass(self.B.T @ x)

    def preconditioner(self, kind):
        return lambda r: r
