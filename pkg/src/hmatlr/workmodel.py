"""Exact integer work model for the H-matrix algorithms.

All recurrences are evaluated with Python integers and memoized per tree.
Values must stay below ``2**127``; exceeding that is treated as an error
so that results remain representable as signed 128-bit integers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .blocktree import ADMISSIBLE, block_descendants, sparsity_constant
from .cluster import descendants
from .errors import InvalidArgument, StructureViolation

INT128_LIMIT = 2 ** 127


@dataclass(frozen=True)
class WorkConstants:
    """``C_ad`` bounds truncated updates, ``C_mg_prime`` one direction of a merge."""

    C_ad: int = 20
    C_mg_prime: int = 64

    def __post_init__(self):
        if self.C_ad < 0 or self.C_mg_prime < 0:
            raise InvalidArgument("work constants must be non-negative")

    @property
    def C_up(self):
        return max(self.C_ad, 1)

    @property
    def C_mg(self):
        return 2 * self.C_mg_prime

    @property
    def C_mm(self):
        return 4 + 2 * self.C_up + self.C_mg

    def as_dict(self):
        return {"C_ad": self.C_ad, "C_up": self.C_up, "C_mg_prime": self.C_mg_prime,
                "C_mg": self.C_mg, "C_mm": self.C_mm}


def _checked(v):
    if not 0 <= v < INT128_LIMIT:
        raise OverflowError(f"work value {v} outside the 128-bit range")
    return v


def dense_lr_count(n):
    return _checked(n * (4 * n * n - 3 * n - 1) // 6)


def dense_invert_count(n):
    return _checked(n * (2 * n * n + 4) // 6)


def dense_rl_count(n):
    return dense_lr_count(n)


class ProductNode:
    __slots__ = ("t", "s", "r", "sons")

    def __init__(self, t, s, r):
        self.t, self.s, self.r = t, s, r
        self.sons = []

    @property
    def is_leaf(self):
        return not self.sons


class ProductTree:
    def __init__(self, root, nodes):
        self.root = root
        self.nodes = nodes

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


def build_product_tree(btree):
    """Minimal tree of triples from (root, root, root); a triple is a leaf iff
    ``(t, s)`` or ``(s, r)`` is a leaf of the block tree."""
    nodes = []

    def make(t, s, r):
        node = ProductNode(t, s, r)
        nodes.append(node)
        if not (btree.get(t, s).is_leaf or btree.get(s, r).is_leaf):
            node.sons = [make(t1, s1, r1) for t1 in t.sons for s1 in s.sons for r1 in r.sons]
        return node

    root = btree.ctree.root
    return ProductTree(make(root, root, root), nodes)


class WorkModel:
    """All ``W_*`` recurrences on one block tree with rank ``k``."""

    def __init__(self, btree, k, consts=None):
        if k < 0:
            raise InvalidArgument(f"rank must be non-negative, got {k}")
        self.btree = btree
        self.ctree = btree.ctree
        self.k = k
        self.consts = consts or WorkConstants()
        self._ev = {}
        self._up = {}
        self._mm = {}
        self._ls = {}
        self._rs = {}
        self._h = {}
        self._fi = {}
        self._tc = None

    # -- helpers --------------------------------------------------------
    def _block(self, t, s):
        b = self.btree.get(t, s)
        if b is None:
            raise StructureViolation(f"({t}, {s}) is not in the block tree")
        return b

    def local_rank(self, t, s):
        b = self._block(t, s)
        if not b.is_leaf:
            raise StructureViolation(f"({t}, {s}) is not a leaf")
        return self.k if b.kind == ADMISSIBLE else min(t.size, s.size)

    @property
    def k_hat(self):
        """``max(k, largest inadmissible-leaf rank)``."""
        inad = [min(b.row.size, b.col.size) for b in self.btree.blocks
                if b.is_leaf and b.kind != ADMISSIBLE]
        return max([self.k] + inad)

    @property
    def k_hat_leaves(self):
        """Maximum local rank over the leaves actually present."""
        return max(self.local_rank(b.row, b.col) for b in self.btree.leaves())

    # -- matrix-vector, update, multiplication --------------------------
    def _ev_coef(self, t, s):
        key = (t.id, s.id)
        v = self._ev.get(key)
        if v is None:
            b = self._block(t, s)
            if b.kind == ADMISSIBLE:
                v = 2 * self.k * (t.size + s.size)
            elif b.is_leaf:
                v = 2 * t.size * s.size + min(t.size, s.size)
            else:
                v = sum(self._ev_coef(b1.row, b1.col) for b1 in b.iter_sons())
            self._ev[key] = v
        return v

    def w_ev(self, t, s, ell):
        return _checked(ell * self._ev_coef(t, s))

    def w_up(self, t, s, ell):
        key = (t.id, s.id, ell)
        v = self._up.get(key)
        if v is None:
            b = self.btree.get(t, s)
            if b is None or b.kind == ADMISSIBLE:
                # pairs outside the tree are parts of a split admissible leaf
                v = self.consts.C_ad * (self.k + ell) ** 2 * (t.size + s.size)
            elif b.is_leaf:
                v = 2 * ell * t.size * s.size
            else:
                v = sum(self.w_up(b1.row, b1.col, ell) for b1 in b.iter_sons())
            self._up[key] = _checked(v)
        return v

    def w_mm(self, t, s, r):
        key = (t.id, s.id, r.id)
        v = self._mm.get(key)
        if v is None:
            bts, bsr = self._block(t, s), self._block(s, r)
            if bts.is_leaf:
                ell = self.local_rank(t, s)
                v = self.w_ev(s, r, ell) + self.w_up(t, r, ell)
            elif bsr.is_leaf:
                ell = self.local_rank(s, r)
                v = self.w_ev(t, s, ell) + self.w_up(t, r, ell)
            else:
                v = sum(self.w_mm(t1, s1, r1)
                        for t1 in t.sons for s1 in s.sons for r1 in r.sons)
                v += self.consts.C_mg * self.k ** 2 * (t.size + r.size)
            self._mm[key] = _checked(v)
        return v

    # -- triangular solves ---------------------------------------------
    def _solve_coef(self, t, lower):
        memo = self._ls if lower else self._rs
        v = memo.get(t.id)
        if v is None:
            if t.is_leaf:
                v = t.size * t.size
            else:
                t1, t2 = t.sons
                off = self._ev_coef(t2, t1) if lower else self._ev_coef(t1, t2)
                v = self._solve_coef(t1, lower) + self._solve_coef(t2, lower) + off
            memo[t.id] = v
        return v

    def w_ls(self, t, ell):
        return _checked(ell * self._solve_coef(t, True))

    def w_rs(self, t, ell):
        return _checked(ell * self._solve_coef(t, False))

    def w_solve_vectors(self, t, ell):
        return self.w_ls(t, ell), self.w_rs(t, ell)

    def w_ll(self, t, s):
        return self._hsolve("ll", t, s)

    def w_rl(self, t, s):
        return self._hsolve("rl", t, s)

    def w_lr(self, s, t):
        return self._hsolve("lr", s, t)

    def w_rr(self, s, t):
        return self._hsolve("rr", s, t)

    def w_solve_h(self, t, s):
        """``(W_ll(t,s), W_rl(t,s), W_lr(t,s), W_rr(t,s))``."""
        return self.w_ll(t, s), self.w_rl(t, s), self.w_lr(t, s), self.w_rr(t, s)

    def _hsolve(self, which, a, b):
        key = (which, a.id, b.id)
        v = self._h.get(key)
        if v is not None:
            return v
        blk = self._block(a, b)
        if which in ("ll", "rl"):
            t, s = a, b
            vec = self.w_ls if which == "ll" else self.w_rs
            if blk.kind == ADMISSIBLE:
                v = vec(t, self.k)
            elif blk.is_leaf:
                v = vec(t, s.size)
            else:
                t1, t2 = t.sons
                v = 0
                for s1 in s.sons:
                    if which == "ll":
                        v += self.w_ll(t1, s1) + self.w_ll(t2, s1) + self.w_mm(t2, t1, s1)
                    else:
                        v += self.w_rl(t1, s1) + self.w_rl(t2, s1) + self.w_mm(t1, t2, s1)
        else:
            s, t = a, b
            # leaf terms as written: W_rs for the lower, W_ls for the upper factor
            vec = self.w_rs if which == "lr" else self.w_ls
            if blk.kind == ADMISSIBLE:
                v = vec(t, self.k)
            elif blk.is_leaf:
                v = vec(t, s.size)
            else:
                t1, t2 = t.sons
                v = 0
                for s1 in s.sons:
                    if which == "lr":
                        v += self.w_lr(s1, t1) + self.w_lr(s1, t2) + self.w_mm(s1, t2, t1)
                    else:
                        v += self.w_rr(s1, t1) + self.w_rr(s1, t2) + self.w_mm(s1, t1, t2)
        self._h[key] = _checked(v)
        return v

    # -- factorization and inversion -----------------------------------
    def w_factor_invert(self, t):
        """``(W_dc(t), W_li(t), W_ri(t), W_in(t))``."""
        v = self._fi.get(t.id)
        if v is not None:
            return v
        n = t.size
        if t.is_leaf:
            v = (dense_lr_count(n), dense_invert_count(n), dense_invert_count(n), dense_rl_count(n))
        else:
            t1, t2 = t.sons
            a, b = self.w_factor_invert(t1), self.w_factor_invert(t2)
            dc = a[0] + b[0] + self.w_ll(t1, t2) + self.w_rr(t2, t1) + self.w_mm(t2, t1, t2)
            li = self.w_ll(t2, t1) + self.w_lr(t2, t1) + a[1] + b[1]
            ri = self.w_rl(t1, t2) + self.w_rr(t1, t2) + a[2] + b[2]
            inv = a[3] + b[3] + self.w_mm(t1, t2, t1) + self.w_lr(t1, t2) + self.w_rl(t2, t1)
            v = tuple(_checked(x) for x in (dc, li, ri, inv))
        self._fi[t.id] = v
        return v

    def w_dc(self, t):
        return self.w_factor_invert(t)[0]

    def w_li(self, t):
        return self.w_factor_invert(t)[1]

    def w_ri(self, t):
        return self.w_factor_invert(t)[2]

    def w_in(self, t):
        return self.w_factor_invert(t)[3]

    # -- multiplication bound ------------------------------------------
    def tree_constants(self):
        if self._tc is None:
            self._tc = {"p": self.ctree.depth, "C_sp": sparsity_constant(self.btree),
                        "k_hat": self.k_hat, "k_hat_leaves": self.k_hat_leaves}
        return self._tc

    def mm_upper_bound(self, t, s, r, k_hat=None):
        """``C_mm C_sp^2 (p+1)^2 k_hat^2 (|t|+|s|+|r|)``."""
        tc = self.tree_constants()
        kh = tc["k_hat"] if k_hat is None else k_hat
        return _checked(self.consts.C_mm * tc["C_sp"] ** 2 * (tc["p"] + 1) ** 2 * kh ** 2
                        * (t.size + s.size + r.size))


# ---------------------------------------------------------------------------
# verification


@dataclass
class Check:
    name: str
    count: int = 0
    violations: list = field(default_factory=list)
    max_ratio: float = 0.0

    def record(self, lhs, rhs, where):
        self.count += 1
        if rhs > 0:
            self.max_ratio = max(self.max_ratio, lhs / rhs)
        elif lhs > 0:
            self.max_ratio = float("inf")
        if lhs > rhs:
            if len(self.violations) < 20:
                self.violations.append({"where": where, "lhs": lhs, "rhs": rhs})
            else:
                self.violations.append(None)

    @property
    def passed(self):
        return not self.violations

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "checks": self.count,
                "violations": len(self.violations),
                "examples": [v for v in self.violations if v is not None],
                "max_ratio": self.max_ratio}


def _rng(c):
    return [c.lo, c.hi]


def default_ells(btree, k):
    ells = set(range(1, 2 * k + 1))
    ells.update(c.size for c in btree.ctree)
    return sorted(ells)


def descendant_sums(btree, ptree=None):
    """Bottom-up sums of sizes over cluster, block and product-tree descendants."""
    csum = {}
    for c in reversed(btree.ctree.clusters):
        csum[c.id] = c.size + sum(csum[s.id] for s in c.sons)
    bsum = {}
    for b in reversed(btree.blocks):
        rows = b.row.size + sum(bsum[(x.row.id, x.col.id)][0] for x in b.iter_sons())
        cols = b.col.size + sum(bsum[(x.row.id, x.col.id)][1] for x in b.iter_sons())
        bsum[(b.row.id, b.col.id)] = (rows, cols)
    psum = {}
    if ptree is not None:
        for nd in reversed(ptree.nodes):
            acc = [nd.t.size, nd.s.size, nd.r.size]
            for son in nd.sons:
                sub = psum[id(son)]
                for i in range(3):
                    acc[i] += sub[i]
            psum[id(nd)] = tuple(acc)
    return csum, bsum, psum


def verify_all(btree, k, consts=None, ells=None):
    """Check the complexity inequalities and descendant bounds on every node.

    Returns a dict with one entry per check; violations are collected, not
    raised.
    """
    wm = WorkModel(btree, k, consts)
    ctree = btree.ctree
    ells = default_ells(btree, k) if ells is None else sorted(set(ells))
    tc = wm.tree_constants()
    p, csp, kh = tc["p"], tc["C_sp"], tc["k_hat"]
    ptree = build_product_tree(btree)

    vec_check = Check("solve_vectors")
    for t in ctree:
        for ell in ells:
            vec_check.record(wm.w_ls(t, ell) + wm.w_rs(t, ell), wm.w_ev(t, t, ell),
                             {"t": _rng(t), "ell": ell})

    left_check = Check("forward_backward_left")
    right_check = Check("forward_backward_right")
    for b in btree.blocks:
        t, s = b.row, b.col
        # W_ll + W_rl <= W_mm(t,t,s) needs (t,t) in the tree, i.e. t on the diagonal path
        if btree.get(t, t) is not None:
            left_check.record(wm.w_ll(t, s) + wm.w_rl(t, s), wm.w_mm(t, t, s),
                              {"t": _rng(t), "s": _rng(s)})
        if btree.get(s, s) is not None:
            right_check.record(wm.w_lr(t, s) + wm.w_rr(t, s), wm.w_mm(t, s, s),
                               {"s": _rng(t), "t": _rng(s)})

    combined = Check("combined")
    base = Check("dense_base_identity")
    for t in ctree:
        dc, li, ri, inv = wm.w_factor_invert(t)
        combined.record(dc + li + ri + inv, wm.w_mm(t, t, t), {"t": _rng(t)})
        if t.is_leaf:
            n = t.size
            total = dc + li + ri + inv
            expect = n * (12 * n * n - 6 * n + 6) // 6
            base.record(abs(total - expect), 0, {"t": _rng(t)})
            base.record(total, 2 * n ** 3, {"t": _rng(t)})

    mm = Check("matrix_multiplication")
    for nd in ptree:
        mm.record(wm.w_mm(nd.t, nd.s, nd.r), wm.mm_upper_bound(nd.t, nd.s, nd.r, kh),
                  {"t": _rng(nd.t), "s": _rng(nd.s), "r": _rng(nd.r)})

    csum, bsum, psum = descendant_sums(btree, ptree)
    cb = Check("cluster_bound")
    for t in ctree:
        cb.record(csum[t.id], (p + 1) * t.size, {"t": _rng(t)})
    bb = Check("block_bound")
    for b in btree.blocks:
        rows, cols = bsum[(b.row.id, b.col.id)]
        where = {"t": _rng(b.row), "s": _rng(b.col)}
        bb.record(rows, csp * (p + 1) * b.row.size, where)
        bb.record(cols, csp * (p + 1) * b.col.size, where)
    pb = Check("product_bound")
    for nd in ptree:
        st, ss, sr = psum[id(nd)]
        where = {"t": _rng(nd.t), "s": _rng(nd.s), "r": _rng(nd.r)}
        pb.record(st, csp ** 2 * (p + 1) * nd.t.size, where)
        pb.record(ss, csp ** 2 * (p + 1) * nd.s.size, where)
        pb.record(sr, csp ** 2 * (p + 1) * nd.r.size, where)

    checks = [vec_check, left_check, right_check, combined, base, mm, cb, bb, pb]
    root = ctree.root
    return {
        "k": k,
        "constants": wm.consts.as_dict(),
        "tree": {"n": ctree.n, "rho": ctree.rho, "admissibility": btree.adm.describe(),
                 "blocks": len(btree), "product_nodes": len(ptree), **tc},
        "ells": [min(ells), max(ells)] if ells else [],
        "root": {"W_mm": wm.w_mm(root, root, root),
                 "mm_bound": wm.mm_upper_bound(root, root, root, kh)},
        "checks": {c.name: c.as_dict() for c in checks},
        "passed": all(c.passed for c in checks),
    }


def block_descendant_sums(btree, t, s):
    """Row and column size sums over ``desc(t, s)`` by direct enumeration."""
    pairs = block_descendants(btree, t, s)
    return sum(a.size for a, _ in pairs), sum(b.size for _, b in pairs)


def cluster_descendant_sum(t):
    return sum(c.size for c in descendants(t))
