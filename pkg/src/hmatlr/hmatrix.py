"""H-matrix storage and the basic arithmetic: addeval, update, merge, addmul.

Node-level routines (leading underscore) work on :class:`HNode` objects and
arrays that are already restricted to the node's row and column ranges.
The public wrappers address blocks by clusters.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import dense
from .blocktree import ADMISSIBLE, INADMISSIBLE
from .dense import FlopCounter, count_product
from .errors import DimensionMismatch, StructureViolation

LOWRANK = "lowrank"
DENSE = "dense"
SUB = "sub"


class HNode:
    """One block of an H-matrix.

    ``lowrank`` holds factors ``A`` (|t| x r) and ``B`` (|s| x r) with value
    ``A B^T``; ``dense`` holds the nearfield matrix ``N``; ``sub`` holds a 2x2
    grid of sons, some of which may be ``None`` in triangular matrices.
    """

    __slots__ = ("row", "col", "kind", "A", "B", "N", "sons", "scratch")

    def __init__(self, row, col, kind, scratch=False):
        self.row = row
        self.col = col
        self.kind = kind
        self.A = self.B = self.N = None
        self.sons = None
        self.scratch = scratch

    @property
    def rank(self):
        return self.A.shape[1] if self.kind == LOWRANK else None

    def iter_sons(self):
        if self.sons:
            for line in self.sons:
                for s in line:
                    if s is not None:
                        yield s

    def set_lowrank(self, A, B):
        self.kind = LOWRANK
        self.A, self.B, self.N, self.sons = A, B, None, None

    def copy(self):
        c = HNode(self.row, self.col, self.kind, self.scratch)
        if self.kind == LOWRANK:
            c.A, c.B = self.A.copy(), self.B.copy()
        elif self.kind == DENSE:
            c.N = self.N.copy()
        else:
            c.sons = [[None if s is None else s.copy() for s in line] for line in self.sons]
        return c

    def __repr__(self):
        extra = f", rank={self.rank}" if self.kind == LOWRANK else ""
        return (f"HNode([{self.row.lo},{self.row.hi})x[{self.col.lo},{self.col.hi}), "
                f"{self.kind}{extra})")


@dataclass
class Arith:
    """Truncation parameters and the flop counter threaded through a computation."""

    rank: int
    eps: float = 0.0
    flops: FlopCounter = field(default_factory=FlopCounter)


def _rows(parent, son):
    return slice(son.lo - parent.lo, son.hi - parent.lo)


class HMatrix:
    """A matrix whose structure mirrors a block tree.

    ``rank`` is the cap ``k`` on admissible leaves and ``eps`` the relative
    truncation tolerance; with ``eps = 0`` every truncation keeps
    ``min(k, numerical rank)`` singular values.
    """

    def __init__(self, btree, root, rank, eps=0.0):
        self.btree = btree
        self.ctree = btree.ctree
        self.root = root
        self.rank = rank
        self.eps = eps
        self._reindex()

    def _reindex(self):
        self.index = {}
        stack = [self.root]
        while stack:
            node = stack.pop()
            self.index[(node.row.id, node.col.id)] = node
            stack.extend(node.iter_sons())

    @property
    def shape(self):
        return (self.ctree.n, self.ctree.n)

    def arith(self, flops=None):
        return Arith(self.rank, self.eps, FlopCounter() if flops is None else flops)

    def block(self, t, s):
        try:
            return self.index[(t.id, s.id)]
        except KeyError:
            raise StructureViolation(f"({t}, {s}) is not a block of this matrix") from None

    def copy(self):
        return HMatrix(self.btree, self.root.copy(), self.rank, self.eps)

    @classmethod
    def zeros(cls, btree, rank, eps=0.0):
        return cls(btree, _build(btree.root, None, rank, eps, None), rank, eps)

    @classmethod
    def from_dense(cls, M, btree, rank, eps=0.0, flops=None):
        M = dense.as_dense(M)
        n = btree.ctree.n
        if M.shape != (n, n):
            raise DimensionMismatch(f"matrix is {M.shape}, tree expects {(n, n)}")
        return cls(btree, _build(btree.root, M, rank, eps, flops), rank, eps)

    def to_dense(self):
        n = self.ctree.n
        out = np.zeros((n, n))
        _fill(self.root, out, 0, 0)
        return out

    def leaves(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.kind == SUB:
                stack.extend(node.iter_sons())
            else:
                yield node

    def max_lowrank_rank(self):
        ranks = [node.rank for node in self.leaves() if node.kind == LOWRANK]
        return max(ranks, default=0)

    def storage(self):
        """Number of stored reals."""
        total = 0
        for node in self.leaves():
            total += node.N.size if node.kind == DENSE else node.A.size + node.B.size
        return total


def _build(block, M, rank, eps, flops):
    t, s = block.row, block.col
    if block.kind == ADMISSIBLE:
        node = HNode(t, s, LOWRANK)
        if M is None:
            node.A, node.B = np.zeros((t.size, 0)), np.zeros((s.size, 0))
        else:
            node.A, node.B = dense.truncate_lowrank(M[t.lo:t.hi, s.lo:s.hi], rank, eps, flops)
    elif block.kind == INADMISSIBLE:
        node = HNode(t, s, DENSE)
        node.N = np.zeros((t.size, s.size)) if M is None else M[t.lo:t.hi, s.lo:s.hi].copy()
    else:
        node = HNode(t, s, SUB)
        node.sons = [[_build(b, M, rank, eps, flops) for b in line] for line in block.sons]
    return node


def _fill(node, out, r0, c0):
    t, s = node.row, node.col
    rows = slice(t.lo - r0, t.hi - r0)
    cols = slice(s.lo - c0, s.hi - c0)
    if node.kind == LOWRANK:
        out[rows, cols] = node.A @ node.B.T
    elif node.kind == DENSE:
        out[rows, cols] = node.N
    else:
        for son in node.iter_sons():
            _fill(son, out, r0, c0)


def node_to_dense(node):
    out = np.zeros((node.row.size, node.col.size))
    _fill(node, out, node.row.lo, node.col.lo)
    return out


# ---------------------------------------------------------------------------
# matrix times dense matrix


def _addeval(alpha, G, Y, X, ar):
    """``X += alpha G Y`` with ``Y`` restricted to the columns and ``X`` to the rows of ``G``."""
    t, s = G.row, G.col
    fc = ar.flops
    if G.kind == SUB:
        for i, ts in enumerate(t.sons):
            for j, ss in enumerate(s.sons):
                son = G.sons[i][j]
                if son is None:
                    raise StructureViolation(f"absent block under {G}")
                _addeval(alpha, son, Y[_rows(s, ss)], X[_rows(t, ts)], ar)
        return
    ell = Y.shape[1]
    if G.kind == LOWRANK:
        r = G.A.shape[1]
        if r == 0 or ell == 0:
            return
        Z = G.B.T @ Y
        Z *= alpha
        X += G.A @ Z
        count_product(fc, r, s.size, ell)
        fc.count(mults=r * ell)
        count_product(fc, t.size, r, ell, accumulate=True)
    else:
        _nearfield_eval(alpha, G.N, Y, X, fc)


def _nearfield_eval(alpha, N, Y, X, fc):
    m, n = N.shape
    ell = Y.shape[1]
    if ell == 0:
        return
    if n <= m:
        X += N @ (alpha * Y)
        fc.count(mults=n * ell)
        count_product(fc, m, n, ell, accumulate=True)
    else:
        P = N @ Y
        X += alpha * P
        count_product(fc, m, n, ell)
        fc.count(mults=m * ell, adds=m * ell)


def _addevaltrans(alpha, G, Y, X, ar):
    """``X += alpha G^T Y`` with ``Y`` restricted to the rows and ``X`` to the columns of ``G``."""
    t, s = G.row, G.col
    fc = ar.flops
    if G.kind == SUB:
        for i, ts in enumerate(t.sons):
            for j, ss in enumerate(s.sons):
                son = G.sons[i][j]
                if son is None:
                    raise StructureViolation(f"absent block under {G}")
                _addevaltrans(alpha, son, Y[_rows(t, ts)], X[_rows(s, ss)], ar)
        return
    ell = Y.shape[1]
    if G.kind == LOWRANK:
        r = G.A.shape[1]
        if r == 0 or ell == 0:
            return
        Z = G.A.T @ Y
        Z *= alpha
        X += G.B @ Z
        count_product(fc, r, t.size, ell)
        fc.count(mults=r * ell)
        count_product(fc, s.size, r, ell, accumulate=True)
    else:
        _nearfield_eval(alpha, G.N.T, Y, X, fc)


# ---------------------------------------------------------------------------
# low-rank update, merge


def _update(Z, A, B, ar):
    """``Z += A B^T``, truncated on low-rank leaves."""
    ell = A.shape[1]
    if A.shape[0] != Z.row.size or B.shape[0] != Z.col.size or B.shape[1] != ell:
        raise DimensionMismatch(
            f"update of {Z} with A {A.shape} and B {B.shape}")
    if ell == 0 or not A.any() or not B.any():
        return
    if Z.kind == SUB:
        t, s = Z.row, Z.col
        for i, ts in enumerate(t.sons):
            for j, ss in enumerate(s.sons):
                son = Z.sons[i][j]
                if son is None:
                    raise StructureViolation(f"update reaches an absent block under {Z}")
                _update(son, A[_rows(t, ts)], B[_rows(s, ss)], ar)
    elif Z.kind == DENSE:
        Z.N += A @ B.T
        count_product(ar.flops, Z.row.size, ell, Z.col.size, accumulate=True)
    else:
        Ah = np.hstack((Z.A, A))
        Bh = np.hstack((Z.B, B))
        Z.A, Z.B = dense.truncate_factors(Ah, Bh, ar.rank, ar.eps, ar.flops)


def _merge_row(As, Bs, ar):
    """Merge ``[A_1 B_1^T ... A_m B_m^T]`` (common rows) into one rank-``k`` block.

    Right-to-left pairwise reductions; returns ``(A, B)`` with ``B`` stacked
    over the column blocks.
    """
    fc = ar.flops
    Qs, Gs = [], []
    for A, B in zip(As, Bs):
        Q, R = dense.thin_qr(B, fc)
        Qs.append(Q)
        Gs.append(A @ R.T)
        count_product(fc, A.shape[0], A.shape[1], R.shape[0])
    m = len(Gs)
    W = Gs[-1]
    isos = [None] * m
    for j in range(m - 2, -1, -1):
        W, isos[j + 1] = dense.truncate_lowrank(np.hstack((Gs[j], W)), ar.rank, ar.eps, fc)
    if m == 1:
        Qhat = np.eye(W.shape[1])
    else:
        # Qhat = diag(I, Qhat_{m-1}) ... diag(I, Qhat_2) Qhat_1, applied from the right end
        Qhat = isos[1]
        for j in range(2, m):
            head = sum(g.shape[1] for g in Gs[:j - 1])
            low = isos[j] @ Qhat[head:]
            count_product(fc, isos[j].shape[0], isos[j].shape[1], Qhat.shape[1])
            Qhat = np.vstack((Qhat[:head], low))
    parts = []
    off = 0
    for Q, G in zip(Qs, Gs):
        c = G.shape[1]
        parts.append(Q @ Qhat[off:off + c])
        count_product(fc, Q.shape[0], c, Qhat.shape[1])
        off += c
    return W, np.vstack(parts)


def _merge(Z, ar):
    """Replace a son-grid of low-rank blocks by a single low-rank block."""
    if Z.kind != SUB or any(s is None or s.kind != LOWRANK for s in Z.iter_sons()) \
            or len(list(Z.iter_sons())) != len(Z.row.sons) * len(Z.col.sons):
        raise StructureViolation(f"{Z} does not hold a grid of low-rank sons")
    rows = []
    for line in Z.sons:
        A, B = _merge_row([s.A for s in line], [s.B for s in line], ar)
        rows.append((A, B))
    # column merge: the same procedure on the transposed blocks
    B, A = _merge_row([b for _, b in rows], [a for a, _ in rows], ar)
    Z.set_lowrank(A, B)


def _split(Z):
    """Temporarily subdivide a leaf into scratch sons."""
    t, s = Z.row, Z.col
    grid = []
    for ts in t.sons:
        line = []
        for ss in s.sons:
            son = HNode(ts, ss, Z.kind, scratch=True)
            if Z.kind == LOWRANK:
                son.A = Z.A[_rows(t, ts)].copy()
                son.B = Z.B[_rows(s, ss)].copy()
            else:
                son.N = Z.N[_rows(t, ts), _rows(s, ss)]  # view, writes go through
            line.append(son)
        grid.append(line)
    kind = Z.kind
    Z.kind, Z.sons = SUB, grid
    return kind


def _addmul(alpha, X, Y, Z, ar):
    """``Z += alpha X Y`` for ``X`` at (t, s), ``Y`` at (s, r), ``Z`` at (t, r)."""
    t, s, r = X.row, X.col, Y.col
    if Y.row is not s or Z.row is not t or Z.col is not r:
        raise StructureViolation(f"incompatible blocks {X}, {Y}, {Z}")
    if X.kind == LOWRANK:
        Bh = np.zeros((r.size, X.A.shape[1]))
        _addevaltrans(alpha, Y, X.B, Bh, ar)
        _update(Z, X.A, Bh, ar)
    elif X.kind == DENSE:
        if t.size <= s.size:
            Ah = np.eye(t.size)
            Bh = np.zeros((r.size, t.size))
            _addevaltrans(alpha, Y, X.N.T, Bh, ar)
        else:
            Ah = X.N
            Bh = np.zeros((r.size, s.size))
            _addevaltrans(alpha, Y, np.eye(s.size), Bh, ar)
        _update(Z, Ah, Bh, ar)
    elif Y.kind == LOWRANK:
        Ah = np.zeros((t.size, Y.A.shape[1]))
        _addeval(alpha, X, Y.A, Ah, ar)
        _update(Z, Ah, Y.B, ar)
    elif Y.kind == DENSE:
        if r.size <= s.size:
            Bh = np.eye(r.size)
            Ah = np.zeros((t.size, r.size))
            _addeval(alpha, X, Y.N, Ah, ar)
        else:
            Bh = Y.N.T
            Ah = np.zeros((t.size, s.size))
            _addeval(alpha, X, np.eye(s.size), Ah, ar)
        _update(Z, Ah, Bh, ar)
    else:
        split = None if Z.kind == SUB else _split(Z)
        for i in range(len(t.sons)):
            for j in range(len(s.sons)):
                for l in range(len(r.sons)):
                    Xs, Ys, Zs = X.sons[i][j], Y.sons[j][l], Z.sons[i][l]
                    if Xs is None or Ys is None or Zs is None:
                        raise StructureViolation(f"addmul reaches an absent block under {Z}")
                    _addmul(alpha, Xs, Ys, Zs, ar)
        if split == LOWRANK:
            _merge(Z, ar)
        elif split == DENSE:
            Z.kind, Z.sons = DENSE, None


# ---------------------------------------------------------------------------
# cluster-addressed wrappers


def _dense_arg(Y, rows, name):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != rows:
        raise DimensionMismatch(f"{name} has {Y.shape[0]} rows, expected {rows}")
    return Y


def addeval(alpha, t, s, G, Y, X, flops=None):
    """``X += alpha G|_{t x s} Y`` in place; ``Y`` has |s| rows and ``X`` |t| rows."""
    node = G.block(t, s)
    Y = _dense_arg(Y, s.size, "Y")
    if X.shape[0] != t.size or X.shape[1:] != Y.shape[1:] and X.ndim == 2:
        raise DimensionMismatch(f"X {X.shape} does not match ({t.size}, {Y.shape[1]})")
    Xv = X[:, None] if X.ndim == 1 else X
    _addeval(alpha, node, Y, Xv, G.arith(flops))
    return X


def addevaltrans(alpha, t, s, G, Y, X, flops=None):
    """``X += alpha G|_{t x s}^T Y`` in place; ``Y`` has |t| rows and ``X`` |s| rows."""
    node = G.block(t, s)
    Y = _dense_arg(Y, t.size, "Y")
    if X.shape[0] != s.size:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, expected {s.size}")
    Xv = X[:, None] if X.ndim == 1 else X
    _addevaltrans(alpha, node, Y, Xv, G.arith(flops))
    return X


def update(t, s, A, B, G, flops=None):
    """``G|_{t x s} += A B^T`` with truncation on admissible leaves."""
    A = _dense_arg(A, t.size, "A")
    B = _dense_arg(B, s.size, "B")
    _update(G.block(t, s), A, B, G.arith(flops))


def merge(t, r, Z, flops=None):
    _merge(Z.block(t, r), Z.arith(flops))


def addmul(alpha, t, s, r, X, Y, Z, flops=None):
    """``Z|_{t x r} += alpha X|_{t x s} Y|_{s x r}`` with truncation in ``Z``."""
    _addmul(alpha, X.block(t, s), Y.block(s, r), Z.block(t, r), Z.arith(flops))


# ---------------------------------------------------------------------------
# leaf-wise binary serialization

_MAGIC = b"HMLR"
_VERSION = 1


def dump_binary(H, fh):
    """Write all leaves: ranges, kind, rank, then float64 little-endian entries (row-major)."""
    leaves = sorted(H.leaves(), key=lambda nd: (nd.row.lo, nd.col.lo))
    fh.write(_MAGIC)
    fh.write(struct.pack("<IQQ", _VERSION, H.ctree.n, len(leaves)))
    for nd in leaves:
        kind = 1 if nd.kind == LOWRANK else 0
        rank = nd.A.shape[1] if kind else min(nd.row.size, nd.col.size)
        fh.write(struct.pack("<QQQQBQ", nd.row.lo, nd.row.hi, nd.col.lo, nd.col.hi, kind, rank))
        arrays = (nd.A, nd.B) if kind else (nd.N,)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_binary(fh):
    """Read a leaf dump back as a list of ``(row, col, kind, arrays)`` records."""
    if fh.read(4) != _MAGIC:
        raise ValueError("not an H-matrix dump")
    version, n, count = struct.unpack("<IQQ", fh.read(20))
    if version != _VERSION:
        raise ValueError(f"unsupported dump version {version}")
    out = []
    for _ in range(count):
        r0, r1, c0, c1, kind, rank = struct.unpack("<QQQQBQ", fh.read(41))
        m, k = r1 - r0, c1 - c0
        if kind:
            A = np.frombuffer(fh.read(8 * m * rank), "<f8").reshape(m, rank)
            B = np.frombuffer(fh.read(8 * k * rank), "<f8").reshape(k, rank)
            out.append(((r0, r1), (c0, c1), LOWRANK, (A, B)))
        else:
            N = np.frombuffer(fh.read(8 * m * k), "<f8").reshape(m, k)
            out.append(((r0, r1), (c0, c1), DENSE, (N,)))
    return n, out
