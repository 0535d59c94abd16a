"""Dense kernels used at the leaves of the block tree.

Every kernel takes an optional :class:`FlopCounter` and charges the
arithmetic it performs.  The counting convention is the classical one:
one operation per scalar addition, multiplication or division; a square
root is charged as a division.  Products with structural zeros of a
triangular operand are not charged, and neither are copies or sign flips.
The LR factorization, the triangular inversion and the RL product charge
exactly ``(n-l) + 2(n-l)**2`` resp. ``1 + (n-l) + (n-l)**2`` operations per
elimination step ``l``.

Two kernels are delegated to LAPACK and charged with a model count
instead: the thin QR (the count of the textbook Householder algorithm with
explicit ``Q``) and the small SVD (the Golub-Reinsch estimate
``14 m n**2 + 8 n**3`` for ``m >= n``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidArgument, PivotBreakdown, SingularDiagonal

DEFAULT_PIVOT_TOL = 1e-14
DEFAULT_REL_TOL = 1e-12

LOWER = "lower"
UPPER = "upper"


@dataclass
class FlopCounter:
    adds: int = 0
    mults: int = 0
    divs: int = 0

    @property
    def total(self) -> int:
        return self.adds + self.mults + self.divs

    def count(self, adds: int = 0, mults: int = 0, divs: int = 0) -> None:
        self.adds += adds
        self.mults += mults
        self.divs += divs

    def __iadd__(self, other: "FlopCounter") -> "FlopCounter":
        self.count(other.adds, other.mults, other.divs)
        return self

    def copy(self) -> "FlopCounter":
        return FlopCounter(self.adds, self.mults, self.divs)

    def as_dict(self) -> dict:
        return {"adds": self.adds, "mults": self.mults, "divs": self.divs, "total": self.total}


def _fc(flops):
    return FlopCounter() if flops is None else flops


def as_dense(M, name="matrix") -> np.ndarray:
    """Validate and convert to a finite 2-D float64 array."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidArgument(f"{name} has non-finite entries")
    return M


def count_product(flops, m, k, n, accumulate=False):
    """Charge ``C (+)= A @ B`` with ``A`` of shape (m, k) and ``B`` of shape (k, n)."""
    if flops is None or m == 0 or n == 0 or k == 0:
        return
    if accumulate:
        flops.count(adds=m * k * n, mults=m * k * n)
    else:
        flops.count(adds=m * (k - 1) * n, mults=m * k * n)


# ---------------------------------------------------------------------------
# triangular kernels


def unit_lower(T):
    """Strictly lower part of ``T`` with an explicit unit diagonal."""
    return np.tril(T, -1) + np.eye(T.shape[0])


def lr_inplace(W, pivot_tol=DEFAULT_PIVOT_TOL, flops=None):
    """Overwrite ``W`` with its packed unpivoted LR factors (unit L below the diagonal)."""
    n = W.shape[0]
    scale = np.abs(W).sum(axis=1).max() if n else 0.0
    for l in range(n):
        p = W[l, l]
        if p == 0.0 or abs(p) < pivot_tol * scale:
            raise PivotBreakdown(f"pivot {p!r} at step {l} below {pivot_tol} * {scale}")
        m = n - l - 1
        if m == 0:
            continue
        W[l + 1:, l] /= p
        W[l + 1:, l + 1:] -= np.outer(W[l + 1:, l], W[l, l + 1:])
        if flops is not None:
            flops.count(divs=m, mults=m * m, adds=m * m)
    return W


def dense_lr(M, pivot_tol=DEFAULT_PIVOT_TOL, flops=None):
    """Unpivoted LR factorization ``M = L R`` with unit-diagonal ``L``.

    Raises :class:`PivotBreakdown` when a pivot falls below
    ``pivot_tol`` times the infinity norm of ``M``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"dense_lr needs a square matrix, got {M.shape}")
    W = lr_inplace(M.copy(), pivot_tol, flops)
    return unit_lower(W), np.triu(W)


def trsolve_inplace(side, transposed, T, Y, pivot_tol=DEFAULT_PIVOT_TOL, flops=None):
    """Solve ``op(T) X = Y`` in place of ``Y``.

    The lower side reads only the strictly lower part of ``T`` and assumes a
    unit diagonal; the upper side reads ``triu(T)``.  ``T`` may therefore be a
    packed LR leaf.
    """
    n = T.shape[0]
    if Y.shape[0] != n:
        raise DimensionMismatch(f"rhs has {Y.shape[0]} rows, triangle is {n}x{n}")
    ell = Y.shape[1]
    if n == 0 or ell == 0:
        return Y
    if side == UPPER:
        d = np.diagonal(T)
        if np.any(np.abs(d) < pivot_tol):
            raise SingularDiagonal(f"diagonal entry below {pivot_tol}")
    forward = (side == LOWER) != transposed
    Tv = T.T if transposed else T
    rows = range(n) if forward else range(n - 1, -1, -1)
    for i in rows:
        if forward and i > 0:
            Y[i] -= Tv[i, :i] @ Y[:i]
        elif not forward and i < n - 1:
            Y[i] -= Tv[i, i + 1:] @ Y[i + 1:]
        if side == UPPER:
            Y[i] /= Tv[i, i]
    if flops is not None:
        off = n * (n - 1) // 2
        flops.count(mults=ell * off, adds=ell * off)
        if side == UPPER:
            flops.count(divs=ell * n)
    return Y


def dense_solve_triangular(side, transposed, T, Y, pivot_tol=DEFAULT_PIVOT_TOL, flops=None):
    T = np.asarray(T, dtype=np.float64)
    Y = np.array(Y, dtype=np.float64, copy=True)
    if side not in (LOWER, UPPER):
        raise InvalidArgument(f"side must be 'lower' or 'upper', got {side!r}")
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionMismatch(f"triangle must be square, got {T.shape}")
    squeeze = Y.ndim == 1
    if squeeze:
        Y = Y[:, None]
    trsolve_inplace(side, transposed, T, Y, pivot_tol, flops)
    return Y[:, 0] if squeeze else Y


def dense_invert_triangular(side, T, pivot_tol=DEFAULT_PIVOT_TOL, flops=None):
    """Invert a triangular matrix column by column.

    The diagonal is handled generically (one reciprocal per column) even
    for the unit lower side, so both sides cost ``n/6 (2n^2 + 4)``.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionMismatch(f"triangle must be square, got {T.shape}")
    n = T.shape[0]
    if side == UPPER:
        U = np.triu(T)
        if np.any(np.abs(np.diagonal(U)) < pivot_tol):
            raise SingularDiagonal(f"diagonal entry below {pivot_tol}")
    elif side == LOWER:
        # the transpose of a unit lower triangle is unit upper
        U = unit_lower(T).T
    else:
        raise InvalidArgument(f"side must be 'lower' or 'upper', got {side!r}")
    X = np.zeros_like(U)
    for j in range(n):
        X[j, j] = 1.0 / U[j, j]
        if j:
            X[:j, j] = -X[j, j] * (X[:j, :j] @ U[:j, j])
        if flops is not None:
            flops.count(divs=1, mults=j * (j + 1) // 2 + j, adds=j * (j - 1) // 2)
    return X if side == UPPER else X.T


def dense_rl_product(R, L, flops=None):
    """Product of an upper ``R`` and a unit-diagonal lower ``L``."""
    R = np.asarray(R, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    if R.shape != L.shape or R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DimensionMismatch(f"R {R.shape} and L {L.shape} must be square and equal")
    n = R.shape[0]
    Ru = np.triu(R)
    Ls = np.tril(L, -1)
    G = np.empty((n, n))
    for j in range(n):
        tail = Ls[j + 1:, j]
        # rows on or above the diagonal use L[j, j] = 1 without a multiplication
        G[:j + 1, j] = Ru[:j + 1, j] + Ru[:j + 1, j + 1:] @ tail
        G[j + 1:, j] = Ru[j + 1:, j + 1:] @ tail
        if flops is not None:
            m = n - 1 - j
            flops.count(mults=(j + 1) * m + m * (m + 1) // 2,
                        adds=(j + 1) * m + m * (m - 1) // 2)
    return G


# ---------------------------------------------------------------------------
# orthogonal factorization and truncation


def householder_qr_cost(m, n):
    """Operation count of a thin Householder QR of an (m, n) matrix with ``Q`` formed.

    Per reflector on a column of length ``L > 1``: the norm, the reflector
    itself, its application to the remaining ``c`` columns and, backwards,
    to the ``p - j`` columns of ``Q``.
    """
    p = min(m, n)
    adds = mults = divs = 0
    for j in range(p):
        L = m - j
        if L == 1:
            continue
        c = n - j - 1
        mults += (L - 1) + 2 + c * (2 * L - 1) + (p - j) * (2 * L - 1)
        adds += (L - 2) + 3 + c * (2 * L - 1) + (p - j) * (2 * L - 1)
        divs += 1 + 2 + (L - 1)
    return adds, mults, divs


def thin_qr(B, flops=None):
    """Thin Householder factorization ``B = Q Rfac``.

    For ``B`` of shape (m, n) with ``p = min(m, n)``, ``Q`` is (m, p) with
    orthonormal columns and ``Rfac`` is (p, n) upper trapezoidal.  The
    factorization itself is LAPACK's; the counter is charged with
    :func:`householder_qr_cost`.
    """
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2:
        raise DimensionMismatch(f"thin_qr needs a 2-D array, got {B.shape}")
    m, n = B.shape
    if m == 0 or n == 0:
        return np.zeros((m, 0)), np.zeros((0, n))
    Q, R = np.linalg.qr(B, mode="reduced")
    if flops is not None:
        adds, mults, divs = householder_qr_cost(m, n)
        flops.count(adds=adds, mults=mults, divs=divs)
    return Q, R


def svd_cost(m, n):
    """Golub-Reinsch estimate for the thin SVD with both singular bases."""
    a, b = max(m, n), min(m, n)
    return 14 * a * b * b + 8 * b ** 3


def _small_svd(M, flops):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if flops is not None and M.size:
        cost = svd_cost(*M.shape)
        flops.count(adds=cost // 2, mults=cost - cost // 2)
    return U, s, Vt


def kept_rank(s, max_rank, rel_tol):
    """Number of singular values above ``rel_tol * s[0]``, never counting
    values at roundoff level, capped at ``max_rank``."""
    if len(s) == 0 or s[0] == 0.0:
        return 0
    tol = max(rel_tol, len(s) * np.finfo(np.float64).eps)
    return int(min(max_rank, np.count_nonzero(s > tol * s[0])))


def truncate_lowrank(M, max_rank, rel_tol=DEFAULT_REL_TOL, flops=None):
    """Best approximation ``C D^T`` of rank at most ``max_rank``.

    Singular values not above ``rel_tol * sigma_1`` are dropped.  ``D`` has
    orthonormal columns.
    """
    M = np.asarray(M, dtype=np.float64)
    if max_rank < 0 or rel_tol < 0:
        raise InvalidArgument("max_rank and rel_tol must be non-negative")
    m, n = M.shape
    if m == 0 or n == 0 or max_rank == 0:
        return np.zeros((m, 0)), np.zeros((n, 0))
    if m >= n:
        Q, R = thin_qr(M, flops)
        U, s, Vt = _small_svd(R, flops)
        r = kept_rank(s, max_rank, rel_tol)
        US = U[:, :r] * s[:r]
        C = Q @ US
        D = Vt[:r].T
        if flops is not None:
            flops.count(mults=US.size)
            count_product(flops, m, Q.shape[1], r)
    else:
        Q, R = thin_qr(M.T, flops)
        U, s, Vt = _small_svd(R.T, flops)
        r = kept_rank(s, max_rank, rel_tol)
        C = U[:, :r] * s[:r]
        D = Q @ Vt[:r].T
        if flops is not None:
            flops.count(mults=C.size)
            count_product(flops, n, Q.shape[1], r)
    return C, D


def truncate_factors(A, B, max_rank, rel_tol=DEFAULT_REL_TOL, flops=None):
    """Recompress ``A B^T`` to rank ``max_rank`` without forming it.

    Householder on ``B``, then truncation of the small product ``A R^T``.
    """
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"factor ranks differ: {A.shape[1]} vs {B.shape[1]}")
    Q, R = thin_qr(B, flops)
    M = A @ R.T
    count_product(flops, A.shape[0], A.shape[1], R.shape[0])
    C, Dh = truncate_lowrank(M, max_rank, rel_tol, flops)
    D = Q @ Dh
    count_product(flops, Q.shape[0], Q.shape[1], Dh.shape[1])
    return C, D
