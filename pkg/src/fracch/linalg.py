"""Sparse linear algebra and the damped Newton iteration.

CSR storage and the Krylov iterations are backed by scipy.sparse; both
solvers apply Jacobi (diagonal) preconditioning.  ``newton_solve`` is the
nonlinear driver for the coupled (phi, mu) block systems: backtracking
line search that halves the step up to 30 times whenever the residual norm
fails to decrease.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ShapeError, SolverError

CsrMatrix = sp.csr_matrix


def spmv(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with an explicit shape check."""
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ShapeError(f"matrix is {A.shape}, vector has {x.shape[0]} rows")
    return A @ x


def _jacobi(A: sp.spmatrix) -> spla.LinearOperator:
    d = A.diagonal().copy()
    d[d == 0.0] = 1.0
    inv = 1.0 / d
    return spla.LinearOperator(A.shape, matvec=lambda v: inv * v)


def _check_square(A, b):
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ShapeError(f"matrix {A.shape} incompatible with rhs {b.shape}")
    return b


def cg_solve(A: sp.spmatrix, b: np.ndarray, tol: float = 1e-10,
             max_iter: int | None = None, x0: np.ndarray | None = None
             ) -> np.ndarray:
    """Preconditioned conjugate gradients for SPD (or consistent PSD) A."""
    b = _check_square(A, b)
    if max_iter is None:
        max_iter = 10 * A.shape[0]
    x, info = spla.cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=max_iter,
                      M=_jacobi(A))
    if info != 0:
        res = float(np.linalg.norm(A @ x - b))
        raise SolverError(
            f"CG did not converge within {max_iter} iterations "
            f"(final residual {res:.3e})", iterations=max_iter, residual=res)
    return x


def bicgstab_solve(A: sp.spmatrix, b: np.ndarray, tol: float = 1e-10,
                   max_iter: int | None = None, x0: np.ndarray | None = None
                   ) -> np.ndarray:
    """Preconditioned BiCGStab for general square systems."""
    b = _check_square(A, b)
    if max_iter is None:
        max_iter = 10 * A.shape[0]
    x, info = spla.bicgstab(A, b, x0=x0, rtol=tol, atol=0.0,
                            maxiter=max_iter, M=_jacobi(A))
    if not np.all(np.isfinite(x)):
        raise SolverError("BiCGStab broke down (non-finite iterate)",
                          iterations=max_iter, residual=float("nan"))
    res = float(np.linalg.norm(A @ x - b))
    bnorm = float(np.linalg.norm(b))
    if info != 0 and res > tol * max(bnorm, 1e-300):
        raise SolverError(
            f"BiCGStab did not converge (info={info}, "
            f"final residual {res:.3e})", iterations=max_iter, residual=res)
    return x


def lu_solve_factory(A: sp.spmatrix):
    """Direct sparse-LU solver closure; factorizes once, reusable."""
    lu = spla.splu(A.tocsc())
    return lu.solve


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    residual_history: list[float] = field(default_factory=list)


def newton_solve(residual, jacobian, x0: np.ndarray, tol: float = 1e-8,
                 max_iter: int = 50, linear_solver=None) -> NewtonResult:
    """Damped Newton iteration.

    Stops when ||F(x)|| <= tol * max(1, ||F(x0)||).  ``linear_solver`` maps
    (A, b) to the Newton correction; defaults to Jacobi-preconditioned
    BiCGStab at relative tolerance 1e-10.  Raises SolverError (with the
    residual history attached) on stagnation or iteration overrun.
    """
    if linear_solver is None:
        def linear_solver(A, b):
            return bicgstab_solve(A, b, tol=1e-10)

    x = np.array(x0, dtype=float)
    F = residual(x)
    norm0 = float(np.linalg.norm(F))
    target = tol * max(1.0, norm0)
    history = [norm0]
    if norm0 <= target:
        return NewtonResult(x, 0, norm0, history)

    for it in range(1, max_iter + 1):
        J = jacobian(x)
        dx = linear_solver(J, -F)
        norm_prev = history[-1]
        step = 1.0
        for _ in range(31):
            x_try = x + step * dx
            F_try = residual(x_try)
            norm_try = float(np.linalg.norm(F_try))
            if norm_try < norm_prev or norm_try <= target:
                break
            step *= 0.5
        else:
            raise SolverError(
                f"Newton line search stalled at iteration {it} "
                f"(residual {norm_prev:.3e})", iterations=it,
                residual=norm_prev, residual_history=history)
        x, F = x_try, F_try
        history.append(norm_try)
        if norm_try <= target:
            return NewtonResult(x, it, norm_try, history)

    raise SolverError(
        f"Newton did not converge in {max_iter} iterations "
        f"(residual {history[-1]:.3e})", iterations=max_iter,
        residual=history[-1], residual_history=history)
