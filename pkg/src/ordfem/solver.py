"""Direct and MINRES solvers for the symmetric indefinite block systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import BlockSystem, Norm, ProblemKind, assemble_gram
from .errors import InvalidArgumentError, IterationLimitError, SingularSystemError

# dense LDL^T (for inertia) is only attempted below this size
INERTIA_CAP = 6000


@dataclass
class SolveReport:
    x: np.ndarray
    residual: float  # ||b - M x||_2 / ||b||_2 (0 for b = 0)
    method: str
    iterations: int | None = None
    inertia: tuple | None = None  # (positive, negative, zero)
    preconditioned_residual: float | None = None  # iterative only


def _matrix(system):
    M = system.matrix if isinstance(system, BlockSystem) else system
    if sp.issparse(M):
        return M.tocsc()
    return sp.csc_matrix(np.atleast_2d(np.asarray(M, dtype=float)))


def relative_residual(M, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - M @ x)
    return float(r / nb) if nb > 0 else float(r)


def inertia(M) -> tuple:
    """(positive, negative, zero) eigenvalue counts from a dense LDL^T factorization."""
    A = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if A.shape[0] > INERTIA_CAP:
        raise InvalidArgumentError(f"dense inertia limited to {INERTIA_CAP} unknowns")
    _, d, _ = la.ldl(A)
    ev = np.linalg.eigvalsh(d)  # d is block diagonal with 1x1/2x2 blocks
    tol = 1e-12 * max(1.0, np.abs(ev).max())
    return int((ev > tol).sum()), int((ev < -tol).sum()), int((np.abs(ev) <= tol).sum())


def solve_direct(system, rhs, with_inertia: bool | None = None) -> SolveReport:
    """Sparse LU with partial pivoting; inertia via dense LDL^T for small systems."""
    M = _matrix(system)
    b = np.asarray(rhs, dtype=float)
    if M.shape[0] != len(b):
        raise InvalidArgumentError("right-hand side length does not match the system")
    try:
        lu = spla.splu(M)
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc
    if np.any(np.abs(lu.U.diagonal()) < 1e-14 * max(1.0, np.abs(M).max())):
        raise SingularSystemError("singular factorization: zero pivot")
    x = lu.solve(b)
    res = relative_residual(M, x, b)
    if with_inertia is None:
        with_inertia = M.shape[0] <= 2000
    return SolveReport(x, res, "splu", inertia=inertia(M) if with_inertia else None)


def block_gram_preconditioner(system: BlockSystem) -> sp.csr_matrix:
    """block-diag(G_R, G_S, G_Y): the Riesz maps of the natural norms."""
    R, S, Y = system.spaces
    if system.kind is ProblemKind.BILAPLACIAN:
        G_R = assemble_gram(R, Norm.H1)
    else:
        G_R = assemble_gram(R, Norm.HCURL)
    G_S = assemble_gram(S, Norm.H1)
    return sp.block_diag([G_R, G_S, system.gram_Y]).tocsr()


def solve_minres(system, rhs, preconditioner=None, tol: float = 1e-10, maxiter: int | None = None) -> SolveReport:
    """Preconditioned MINRES.  ``preconditioner`` is an SPD matrix whose inverse is applied.

    Converged means ||b - M x||_{P^-1} <= tol ||b||_{P^-1}.  scipy's own stopping
    test is a backward-error estimate that can stop well short of that, so the
    inner tolerance is tightened and the iteration warm-restarted until the
    true preconditioned residual meets ``tol``.
    """
    M = _matrix(system).tocsr()
    b = np.asarray(rhs, dtype=float)
    N = M.shape[0]
    if maxiter is None:
        maxiter = 10 * N
    if not np.any(b):
        return SolveReport(np.zeros(N), 0.0, "minres", iterations=0)
    if preconditioner is not None:
        lu = spla.splu(sp.csc_matrix(preconditioner))
        apply = lu.solve
        Minv = spla.LinearOperator((N, N), matvec=apply, dtype=float)
    else:
        apply = lambda v: v  # noqa: E731
        Minv = None
    pnorm = lambda v: float(np.sqrt(max(v @ apply(v), 0.0)))  # noqa: E731
    bnorm = pnorm(b)
    count = [0]

    def cb(_):
        count[0] += 1

    x = np.zeros(N)
    inner = tol
    while True:
        left = maxiter - count[0]
        if left <= 0:
            raise IterationLimitError(f"MINRES did not converge in {maxiter} iterations")
        x, info = spla.minres(M, b, x0=x, rtol=inner, maxiter=left, M=Minv, callback=cb)
        if info < 0:
            raise SingularSystemError(f"MINRES breakdown (info={info})")
        achieved = pnorm(b - M @ x) / bnorm
        if achieved <= tol:
            break
        if info > 0:
            raise IterationLimitError(f"MINRES did not converge in {maxiter} iterations")
        inner = max(inner * min(0.5, tol / achieved), np.finfo(float).eps)
    return SolveReport(x, relative_residual(M, x, b), "minres", iterations=count[0], preconditioned_residual=achieved)
