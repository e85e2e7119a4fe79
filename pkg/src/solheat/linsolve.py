"""Direct tridiagonal / cyclic-tridiagonal solvers and a CG solver.

The direct solvers are Thomas eliminations compiled with numba; the batched
variants solve many independent systems that share the problem size (one per
mesh line), which is where the split 2D scheme gets its O(n)-per-line cost.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.sparse.linalg import LinearOperator, cg

from .errors import NonConvergenceError, SingularSystemError

__all__ = [
    "TridiagonalSystem",
    "CyclicTridiagonalSystem",
    "SparseSymmetricSystem",
    "solve_tridiagonal",
    "solve_cyclic_tridiagonal",
    "solve_sparse_spd",
    "thomas_batched",
    "cyclic_batched",
]

_PIVOT_TOL = 1e-300


@dataclass
class TridiagonalSystem:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=float)
        self.diag = np.asarray(self.diag, dtype=float)
        self.sup = np.asarray(self.sup, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = self.diag.size
        if n < 1 or self.rhs.size != n or self.sub.size != n - 1 or self.sup.size != n - 1:
            raise ValueError("inconsistent tridiagonal system sizes")

    def residual(self, x):
        r = self.diag * x - self.rhs
        r[1:] += self.sub * x[:-1]
        r[:-1] += self.sup * x[1:]
        return r


@dataclass
class CyclicTridiagonalSystem(TridiagonalSystem):
    """Tridiagonal system plus corner entries A[0, n-1] and A[n-1, 0]."""

    corner_top: float = 0.0
    corner_bottom: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if self.diag.size < 3:
            raise ValueError("cyclic reduction needs n >= 3")

    def residual(self, x):
        r = super().residual(x)
        r[0] += self.corner_top * x[-1]
        r[-1] += self.corner_bottom * x[0]
        return r


@dataclass
class SparseSymmetricSystem:
    """SPD system in any scipy-sparse format, with CG controls."""

    matrix: object
    rhs: np.ndarray
    tol: float = 1e-10
    max_iter: int = 10000
    x0: np.ndarray = field(default=None)

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float)
        d = self.matrix.diagonal()
        if np.any(d <= 0):
            raise ValueError("SPD system must have a strictly positive diagonal")


@njit(cache=True)
def _thomas_kernel(sub, diag, sup, rhs, out):
    # rhs/out: (m, n) batches; sub/diag/sup: (m, n) (sub[:,0], sup[:,n-1] unused)
    m, n = rhs.shape
    c = np.empty(n)
    d = np.empty(n)
    for k in range(m):
        piv = diag[k, 0]
        if abs(piv) < _PIVOT_TOL:
            return k + 1
        c[0] = sup[k, 0] / piv if n > 1 else 0.0
        d[0] = rhs[k, 0] / piv
        for i in range(1, n):
            piv = diag[k, i] - sub[k, i] * c[i - 1]
            if abs(piv) < _PIVOT_TOL:
                return k + 1
            if i < n - 1:
                c[i] = sup[k, i] / piv
            d[i] = (rhs[k, i] - sub[k, i] * d[i - 1]) / piv
        out[k, n - 1] = d[n - 1]
        for i in range(n - 2, -1, -1):
            out[k, i] = d[i] - c[i] * out[k, i + 1]
    return 0


def _as_batch(a, m, n, offset):
    """Expand a coefficient array to (m, n) with the off-diagonal padding."""
    a = np.asarray(a, dtype=float)
    out = np.zeros((m, n))
    if a.ndim == 1:
        if offset < 0:      # sub-diagonal: entries for rows 1..n-1
            out[:, 1:] = a
        elif offset > 0:    # super-diagonal: entries for rows 0..n-2
            out[:, :-1] = a
        else:
            out[:, :] = a
    else:
        if offset < 0:
            out[:, 1:] = a
        elif offset > 0:
            out[:, :-1] = a
        else:
            out[:, :] = a
    return out


def thomas_batched(sub, diag, sup, rhs):
    """Solve m independent tridiagonal systems of size n.

    ``rhs`` has shape (m, n).  Coefficients may be shared across the batch
    (1D arrays of length n-1 / n) or per-system (2D of shape (m, n-1) / (m, n)).
    """
    rhs = np.ascontiguousarray(rhs, dtype=float)
    m, n = rhs.shape
    sub_b = _as_batch(sub, m, n, -1)
    diag_b = _as_batch(diag, m, n, 0)
    sup_b = _as_batch(sup, m, n, +1)
    out = np.empty_like(rhs)
    bad = _thomas_kernel(sub_b, diag_b, sup_b, rhs, out)
    if bad:
        raise SingularSystemError(f"zero pivot in tridiagonal elimination (system {bad - 1})")
    return out


def cyclic_batched(sub, diag, sup, corner_top, corner_bottom, rhs):
    """Solve m cyclic tridiagonal systems via Sherman-Morrison.

    Corner coefficients couple unknowns 0 and n-1; shapes follow
    :func:`thomas_batched`, corners are scalars or length-m arrays.
    """
    rhs = np.ascontiguousarray(rhs, dtype=float)
    m, n = rhs.shape
    if n < 3:
        raise ValueError("cyclic reduction needs n >= 3")
    diag_b = _as_batch(diag, m, n, 0)
    ct = np.broadcast_to(np.asarray(corner_top, dtype=float), (m,))
    cb = np.broadcast_to(np.asarray(corner_bottom, dtype=float), (m,))

    # A = B + u v^T with u = (alpha, 0, ..., cb), v = (1, 0, ..., ct/alpha);
    # alpha = -diag[0] keeps B's pivots away from zero for dominant systems.
    alpha = -diag_b[:, 0].copy()
    alpha[alpha == 0.0] = 1.0
    bdiag = diag_b.copy()
    bdiag[:, 0] -= alpha
    bdiag[:, -1] -= cb * ct / alpha

    u = np.zeros((m, n))
    u[:, 0] = alpha
    u[:, -1] = cb

    stacked = np.concatenate([rhs, u], axis=0)
    sub_b = _as_batch(sub, m, n, -1)
    sup_b = _as_batch(sup, m, n, +1)
    sol = thomas_batched(
        np.vstack([sub_b[:, 1:], sub_b[:, 1:]]),
        np.vstack([bdiag, bdiag]),
        np.vstack([sup_b[:, :-1], sup_b[:, :-1]]),
        stacked,
    )
    y, q = sol[:m], sol[m:]
    vy = y[:, 0] + ct / alpha * y[:, -1]
    vq = q[:, 0] + ct / alpha * q[:, -1]
    denom = 1.0 + vq
    if np.any(np.abs(denom) < 1e-14):
        raise SingularSystemError("singular cyclic tridiagonal system")
    return y - q * (vy / denom)[:, None]


def solve_tridiagonal(sys):
    """Solution of a single tridiagonal system by Thomas elimination."""
    x = thomas_batched(sys.sub, sys.diag, sys.sup, sys.rhs[None, :])
    return x[0]


def solve_cyclic_tridiagonal(sys):
    """Solution of a cyclic tridiagonal system (rank-one correction)."""
    if sys.corner_top == 0.0 and sys.corner_bottom == 0.0:
        return solve_tridiagonal(sys)
    x = cyclic_batched(sys.sub, sys.diag, sys.sup,
                       sys.corner_top, sys.corner_bottom, sys.rhs[None, :])
    return x[0]


def solve_sparse_spd(sys):
    """Conjugate-gradient solve with diagonal scaling."""
    d = sys.matrix.diagonal()
    M = LinearOperator(sys.matrix.shape, matvec=lambda v: v / d)
    x, info = cg(sys.matrix, sys.rhs, x0=sys.x0, rtol=sys.tol, atol=0.0,
                 maxiter=sys.max_iter, M=M)
    if info > 0:
        rnorm = float(np.linalg.norm(sys.matrix @ x - sys.rhs))
        raise NonConvergenceError(
            f"CG did not reach tolerance {sys.tol:g} in {sys.max_iter} iterations",
            residual=rnorm, iterations=info)
    if info < 0:
        raise ValueError("invalid CG input")
    return x
