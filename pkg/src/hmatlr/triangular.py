"""Triangular H-matrix algorithms: solves, LR factorization, inversion.

A triangular factor is passed as an H-matrix plus a side.  Solves read only
their own triangle: the lower side uses the blocks strictly below the
diagonal and the strictly lower part of the diagonal leaves (with an
implicit unit diagonal), the upper side the blocks above the diagonal and
``triu`` of the diagonal leaves.  One H-matrix can therefore hold both
factors in packed form, which is what :func:`invert_inplace` uses.

All H-matrix solves work in place on the output; when the output is a
different matrix the right-hand side block is copied into it first.
"""
from __future__ import annotations

import numpy as np

from . import dense
from .dense import LOWER, UPPER, FlopCounter
from .errors import DimensionMismatch, InvalidArgument, StructureViolation
from .hmatrix import DENSE, LOWRANK, SUB, HMatrix, HNode, _addeval, _addevaltrans, _addmul


class TriangularHMatrix(HMatrix):
    """H-matrix with the blocks of the other triangle absent.

    Diagonal leaves hold ``unit_lower(N)`` for the lower side and
    ``triu(N)`` for the upper side, so :meth:`to_dense` is exactly
    triangular.
    """

    def __init__(self, btree, root, rank, eps=0.0, side=LOWER):
        if side not in (LOWER, UPPER):
            raise InvalidArgument(f"side must be 'lower' or 'upper', got {side!r}")
        self.side = side
        super().__init__(btree, root, rank, eps)

    def copy(self):
        return TriangularHMatrix(self.btree, self.root.copy(), self.rank, self.eps, self.side)

    @classmethod
    def zeros(cls, btree, rank, eps=0.0, side=LOWER):
        proto = HMatrix.zeros(btree, rank, eps)
        _prune(proto.root, side)
        return cls(btree, proto.root, rank, eps, side)

    @classmethod
    def from_packed(cls, G, side):
        """Extract one triangle of a packed LR matrix."""
        root = G.root.copy()
        _prune(root, side)
        return cls(G.btree, root, G.rank, G.eps, side)


def _prune(node, side):
    """Drop the other triangle below a diagonal node and mask diagonal leaves."""
    if node.kind == SUB:
        if side == LOWER:
            node.sons[0][1] = None
        else:
            node.sons[1][0] = None
        _prune(node.sons[0][0], side)
        _prune(node.sons[1][1], side)
    elif node.kind == DENSE:
        node.N = dense.unit_lower(node.N) if side == LOWER else np.triu(node.N)
    else:
        raise StructureViolation(f"diagonal block {node} is admissible")


def _assign(dst, src, scale=1.0):
    """Overwrite the contents of ``dst`` by ``scale * src`` (same block structure)."""
    if src.kind == SUB and dst.kind == SUB:
        for dl, sl in zip(dst.sons, src.sons):
            for d, s in zip(dl, sl):
                if (d is None) != (s is None):
                    raise StructureViolation(f"cannot copy {src} into {dst}")
                if d is not None:
                    _assign(d, s, scale)
        return
    dst.kind, dst.sons = src.kind, None
    if src.kind == LOWRANK:
        dst.A, dst.B, dst.N = scale * src.A, src.B.copy(), None
    elif src.kind == DENSE:
        dst.N, dst.A, dst.B = scale * src.N, None, None
    else:
        dst.sons = [[None if s is None else s.copy() for s in line] for line in src.sons]
        if scale != 1.0:
            _scale(dst, scale)


def _scale(node, scale):
    if node.kind == LOWRANK:
        node.A *= scale
    elif node.kind == DENSE:
        node.N *= scale
    else:
        for son in node.iter_sons():
            _scale(son, scale)


def _diag(T, t):
    node = T.index.get((t.id, t.id))
    if node is None:
        raise StructureViolation(f"factor has no diagonal block at {t}")
    return node


def _rows(parent, son):
    return slice(son.lo - parent.lo, son.hi - parent.lo)


# ---------------------------------------------------------------------------
# dense right-hand sides


def _solve_vec(side, trans, t, T, Y, ar):
    """Overwrite ``Y`` (|t| rows) with ``op(T_tt)^{-1} Y``."""
    D = _diag(T, t)
    if D.kind == DENSE:
        dense.trsolve_inplace(side, trans, D.N, Y, flops=ar.flops)
        return
    t1, t2 = t.sons
    Y1, Y2 = Y[_rows(t, t1)], Y[_rows(t, t2)]
    if side == LOWER:
        off = D.sons[1][0]
        if not trans:
            _solve_vec(side, trans, t1, T, Y1, ar)
            _addeval(-1.0, off, Y1, Y2, ar)
            _solve_vec(side, trans, t2, T, Y2, ar)
        else:
            _solve_vec(side, trans, t2, T, Y2, ar)
            _addevaltrans(-1.0, off, Y2, Y1, ar)
            _solve_vec(side, trans, t1, T, Y1, ar)
    else:
        off = D.sons[0][1]
        if not trans:
            _solve_vec(side, trans, t2, T, Y2, ar)
            _addeval(-1.0, off, Y2, Y1, ar)
            _solve_vec(side, trans, t1, T, Y1, ar)
        else:
            _solve_vec(side, trans, t1, T, Y1, ar)
            _addevaltrans(-1.0, off, Y1, Y2, ar)
            _solve_vec(side, trans, t2, T, Y2, ar)


def solve_matrix(side, transposed, t, T, Y, X=None, flops=None):
    """Solve ``op(T|_{t x t}) X = Y`` for a dense ``Y`` with |t| rows.

    ``side='lower'`` with ``transposed=False`` is forward substitution with
    the unit lower factor, ``side='upper'`` backward substitution.  Without
    ``X`` a new array is returned; ``X`` may be ``Y`` itself.
    """
    if side not in (LOWER, UPPER):
        raise InvalidArgument(f"side must be 'lower' or 'upper', got {side!r}")
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape[0] != t.size:
        raise DimensionMismatch(f"rhs has {Y.shape[0]} rows, cluster has {t.size}")
    if X is None:
        X = Y.copy()
    elif X is not Y:
        X[...] = Y
    Xv = X[:, None] if X.ndim == 1 else X
    _solve_vec(side, transposed, t, T, Xv, T.arith(flops))
    return X


# ---------------------------------------------------------------------------
# H-matrix right-hand sides


def _solve_left(side, t, s, T, X, ar):
    """Overwrite ``X_ts`` with ``T_tt^{-1} X_ts`` (llsolve / rlsolve)."""
    node = X.block(t, s)
    if node.kind == LOWRANK:
        _solve_vec(side, False, t, T, node.A, ar)
        return
    if node.kind == DENSE:
        _solve_vec(side, False, t, T, node.N, ar)
        return
    t1, t2 = t.sons
    D = _diag(T, t)
    for s1 in s.sons:
        if side == LOWER:
            _solve_left(side, t1, s1, T, X, ar)
            _addmul(-1.0, D.sons[1][0], X.block(t1, s1), X.block(t2, s1), ar)
            _solve_left(side, t2, s1, T, X, ar)
        else:
            _solve_left(side, t2, s1, T, X, ar)
            _addmul(-1.0, D.sons[0][1], X.block(t2, s1), X.block(t1, s1), ar)
            _solve_left(side, t1, s1, T, X, ar)


def _solve_right(side, s, t, T, X, ar):
    """Overwrite ``X_st`` with ``X_st T_tt^{-1}`` (lrsolve / rrsolve)."""
    node = X.block(s, t)
    if node.kind == LOWRANK:
        _solve_vec(side, True, t, T, node.B, ar)
        return
    if node.kind == DENSE:
        _solve_vec(side, True, t, T, node.N.T, ar)
        return
    t1, t2 = t.sons
    D = _diag(T, t)
    for s1 in s.sons:
        if side == LOWER:
            _solve_right(side, s1, t2, T, X, ar)
            _addmul(-1.0, X.block(s1, t2), D.sons[1][0], X.block(s1, t1), ar)
            _solve_right(side, s1, t1, T, X, ar)
        else:
            _solve_right(side, s1, t1, T, X, ar)
            _addmul(-1.0, X.block(s1, t1), D.sons[0][1], X.block(s1, t2), ar)
            _solve_right(side, s1, t2, T, X, ar)


def _prepare(Y, X, r, c):
    if X is None:
        return Y
    if X is not Y:
        _assign(X.block(r, c), Y.block(r, c))
    return X


def hsolve_left(side, t, s, T, Y, X=None, flops=None):
    """Solve ``T|_{t x t} X|_{t x s} = Y|_{t x s}``; ``X`` defaults to ``Y`` (in place)."""
    X = _prepare(Y, X, t, s)
    _solve_left(side, t, s, T, X, X.arith(flops))
    return X


def hsolve_right(side, s, t, T, Y, X=None, flops=None):
    """Solve ``X|_{s x t} T|_{t x t} = Y|_{s x t}``; ``X`` defaults to ``Y`` (in place)."""
    X = _prepare(Y, X, s, t)
    _solve_right(side, s, t, T, X, X.arith(flops))
    return X


def llsolve(t, s, L, Y, X=None, flops=None):
    return hsolve_left(LOWER, t, s, L, Y, X, flops)


def rlsolve(t, s, R, Y, X=None, flops=None):
    return hsolve_left(UPPER, t, s, R, Y, X, flops)


def lrsolve(s, t, L, Y, X=None, flops=None):
    return hsolve_right(LOWER, s, t, L, Y, X, flops)


def rrsolve(s, t, R, Y, X=None, flops=None):
    return hsolve_right(UPPER, s, t, R, Y, X, flops)


# ---------------------------------------------------------------------------
# factorization


def _lrdecomp(t, G, L, R, ar, pivot_tol):
    node = G.block(t, t)
    if node.kind == DENSE:
        if L is G and R is G:
            dense.lr_inplace(node.N, pivot_tol, ar.flops)
        else:
            W = dense.lr_inplace(node.N.copy(), pivot_tol, ar.flops)
            L.block(t, t).N = dense.unit_lower(W)
            R.block(t, t).N = np.triu(W)
        return
    if node.kind != SUB:
        raise StructureViolation(f"diagonal block {node} is admissible")
    t1, t2 = t.sons
    _lrdecomp(t1, G, L, R, ar, pivot_tol)
    _prepare(G, R, t1, t2)
    _solve_left(LOWER, t1, t2, L, R, ar)
    _prepare(G, L, t2, t1)
    _solve_right(UPPER, t2, t1, R, L, ar)
    _addmul(-1.0, L.block(t2, t1), R.block(t1, t2), node.sons[1][1], ar)
    _lrdecomp(t2, G, L, R, ar, pivot_tol)


def lrdecomp(t, G, L=None, R=None, flops=None, pivot_tol=dense.DEFAULT_PIVOT_TOL):
    """LR factorization of ``G|_{t x t}``.

    The trailing diagonal blocks of ``G`` are overwritten by Schur
    complements.  Without ``L`` and ``R`` the factors are stored packed in
    ``G`` itself; otherwise they are written into the given triangular
    matrices.
    """
    L = G if L is None else L
    R = G if R is None else R
    _lrdecomp(t, G, L, R, G.arith(flops), pivot_tol)
    return L, R


def lr_factors(G, flops=None, pivot_tol=dense.DEFAULT_PIVOT_TOL):
    """Factorize a copy of ``G`` and return the triangular factors ``(L, R)``."""
    W = G.copy()
    L = TriangularHMatrix.zeros(G.btree, G.rank, G.eps, LOWER)
    R = TriangularHMatrix.zeros(G.btree, G.rank, G.eps, UPPER)
    lrdecomp(G.ctree.root, W, L, R, flops, pivot_tol)
    return L, R


# ---------------------------------------------------------------------------
# inversion


def _linvert(t, L, Lt, ar):
    node = L.block(t, t)
    if node.kind == DENSE:
        Lt.block(t, t).N = dense.dense_invert_triangular(LOWER, node.N, flops=ar.flops)
        return
    t1, t2 = t.sons
    if Lt is not L:
        _assign(Lt.block(t2, t1), L.block(t2, t1), -1.0)
    else:
        _scale(Lt.block(t2, t1), -1.0)
    _solve_left(LOWER, t2, t1, L, Lt, ar)
    _solve_right(LOWER, t2, t1, L, Lt, ar)
    _linvert(t1, L, Lt, ar)
    _linvert(t2, L, Lt, ar)


def _rinvert(t, R, Rt, ar):
    node = R.block(t, t)
    if node.kind == DENSE:
        Rt.block(t, t).N = dense.dense_invert_triangular(UPPER, node.N, flops=ar.flops)
        return
    t1, t2 = t.sons
    if Rt is not R:
        _assign(Rt.block(t1, t2), R.block(t1, t2), -1.0)
    else:
        _scale(Rt.block(t1, t2), -1.0)
    _solve_left(UPPER, t1, t2, R, Rt, ar)
    _solve_right(UPPER, t1, t2, R, Rt, ar)
    _rinvert(t1, R, Rt, ar)
    _rinvert(t2, R, Rt, ar)


def linvert(t, L, Ltilde=None, flops=None):
    """``Ltilde|_{t x t} = L|_{t x t}^{-1}``; in place when ``Ltilde`` is omitted."""
    Lt = L if Ltilde is None else Ltilde
    _linvert(t, L, Lt, Lt.arith(flops))
    return Lt


def rinvert(t, R, Rtilde=None, flops=None):
    """``Rtilde|_{t x t} = R|_{t x t}^{-1}``; in place when ``Rtilde`` is omitted."""
    Rt = R if Rtilde is None else Rtilde
    _rinvert(t, R, Rt, Rt.arith(flops))
    return Rt


def _lrinvert(t, L, R, Lt, Rt, Gt, ar):
    node = Gt.block(t, t)
    if node.kind == DENSE:
        node.N = dense.dense_rl_product(Rt.block(t, t).N, Lt.block(t, t).N, flops=ar.flops)
        return
    t1, t2 = t.sons
    _lrinvert(t1, L, R, Lt, Rt, Gt, ar)
    _addmul(1.0, Rt.block(t1, t2), Lt.block(t2, t1), node.sons[0][0], ar)
    _prepare(Rt, Gt, t1, t2)
    _solve_right(LOWER, t1, t2, L, Gt, ar)
    _prepare(Lt, Gt, t2, t1)
    _solve_left(UPPER, t2, t1, R, Gt, ar)
    _lrinvert(t2, L, R, Lt, Rt, Gt, ar)


def lrinvert(t, L, R, Ltilde, Rtilde, Gtilde, flops=None):
    """``Gtilde|_{t x t} = Rtilde|_{t x t} Ltilde|_{t x t}`` using ``L``, ``R`` for the off-diagonal products."""
    _lrinvert(t, L, R, Ltilde, Rtilde, Gtilde, Gtilde.arith(flops))
    return Gtilde


def _invert_factored(t, G, ar):
    node = G.block(t, t)
    if node.kind == DENSE:
        Lt = dense.dense_invert_triangular(LOWER, node.N, flops=ar.flops)
        Rt = dense.dense_invert_triangular(UPPER, node.N, flops=ar.flops)
        node.N = dense.dense_rl_product(Rt, Lt, flops=ar.flops)
        return
    t1, t2 = t.sons
    # off-diagonal blocks of the inverted factors
    _scale(node.sons[1][0], -1.0)
    _solve_left(LOWER, t2, t1, G, G, ar)
    _solve_right(LOWER, t2, t1, G, G, ar)
    _scale(node.sons[0][1], -1.0)
    _solve_left(UPPER, t1, t2, G, G, ar)
    _solve_right(UPPER, t1, t2, G, G, ar)
    _invert_factored(t1, G, ar)
    _addmul(1.0, node.sons[0][1], node.sons[1][0], node.sons[0][0], ar)
    # the second diagonal block still holds L22 and R22
    _solve_left(UPPER, t2, t1, G, G, ar)
    _solve_right(LOWER, t1, t2, G, G, ar)
    _invert_factored(t2, G, ar)


def invert_factored_inplace(t, G, flops=None):
    """Overwrite packed LR factors in ``G|_{t x t}`` with the inverse of their product."""
    _invert_factored(t, G, G.arith(flops))
    return G


def invert_inplace(t, G, flops=None, pivot_tol=dense.DEFAULT_PIVOT_TOL):
    """Overwrite ``G|_{t x t}`` with an approximation of its inverse.

    Packed factorization followed by the interleaved inversion; no second
    H-matrix is allocated.
    """
    lrdecomp(t, G, flops=flops, pivot_tol=pivot_tol)
    return invert_factored_inplace(t, G, flops)


def pipeline_inverse(G, flops=None, pivot_tol=dense.DEFAULT_PIVOT_TOL):
    """Explicit pipeline: factorize, invert both factors, multiply.

    Returns ``(L, R, Ltilde, Rtilde, Gtilde, phase_flops)`` and leaves ``G``
    unchanged.
    """
    root = G.ctree.root
    phases = {}
    fc = FlopCounter()
    L, R = lr_factors(G, fc, pivot_tol)
    phases["lrdecomp"] = fc
    fc = FlopCounter()
    Lt = linvert(root, L, L.copy(), fc)
    phases["linvert"] = fc
    fc = FlopCounter()
    Rt = rinvert(root, R, R.copy(), fc)
    phases["rinvert"] = fc
    fc = FlopCounter()
    Gt = HMatrix.zeros(G.btree, G.rank, G.eps)
    lrinvert(root, L, R, Lt, Rt, Gt, fc)
    phases["lrinvert"] = fc
    if flops is not None:
        for f in phases.values():
            flops += f
    return L, R, Lt, Rt, Gt, phases
