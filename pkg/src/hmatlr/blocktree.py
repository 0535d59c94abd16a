"""Block trees over pairs of clusters, with weak or eta admissibility."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidArgument

ADMISSIBLE = "admissible"
INADMISSIBLE = "inadmissible"
SUBDIVIDED = "subdivided"


@dataclass(frozen=True)
class Admissibility:
    """``weak``: disjoint ranges.  ``eta``: ``max(diam) <= eta * dist`` on the unit interval."""

    kind: str = "weak"
    eta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("weak", "eta"):
            raise InvalidArgument(f"unknown admissibility {self.kind!r}")
        if self.kind == "eta" and not self.eta > 0:
            raise InvalidArgument(f"eta must be positive, got {self.eta}")

    def __call__(self, t, s, n):
        if self.kind == "weak":
            return t.hi <= s.lo or s.hi <= t.lo
        diam = max(t.size, s.size) / n
        dist = max(0, s.lo - t.hi, t.lo - s.hi) / n
        return diam <= self.eta * dist

    def describe(self):
        return "weak" if self.kind == "weak" else f"eta({self.eta:g})"


class Block:
    __slots__ = ("row", "col", "kind", "sons", "level")

    def __init__(self, row, col, kind, level):
        self.row = row
        self.col = col
        self.kind = kind
        self.level = level
        self.sons = None  # 2-D list indexed like (row.sons, col.sons)

    @property
    def is_leaf(self):
        return self.kind != SUBDIVIDED

    def iter_sons(self):
        if self.sons:
            for line in self.sons:
                yield from line

    def __repr__(self):
        return (f"Block([{self.row.lo},{self.row.hi})x[{self.col.lo},{self.col.hi}), "
                f"{self.kind})")


class BlockTree:
    def __init__(self, ctree, adm, root, blocks):
        self.ctree = ctree
        self.adm = adm
        self.root = root
        self.blocks = blocks
        self.index = {(b.row.id, b.col.id): b for b in blocks}
        self.depth = max(b.level for b in blocks)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def get(self, t, s):
        return self.index.get((t.id, s.id))

    def __contains__(self, pair):
        t, s = pair
        return (t.id, s.id) in self.index

    def leaves(self):
        return [b for b in self.blocks if b.is_leaf]

    def to_json(self):
        return {
            "admissibility": self.adm.describe(),
            "blocks": [
                {"row": [b.row.lo, b.row.hi], "col": [b.col.lo, b.col.hi], "kind": b.kind}
                for b in self.blocks
            ],
        }


def build_block_tree(ctree, adm=None):
    adm = adm or Admissibility()
    n = ctree.n
    blocks = []

    def make(t, s, level):
        if t is not s and adm(t, s, n):
            b = Block(t, s, ADMISSIBLE, level)
        elif t.is_leaf or s.is_leaf:
            b = Block(t, s, INADMISSIBLE, level)
        else:
            b = Block(t, s, SUBDIVIDED, level)
        blocks.append(b)
        if b.kind == SUBDIVIDED:
            b.sons = [[make(t1, s1, level + 1) for s1 in s.sons] for t1 in t.sons]
        return b

    root = make(ctree.root, ctree.root, 0)
    return BlockTree(ctree, adm, root, blocks)


def sparsity_constant(btree):
    rows, cols = {}, {}
    for b in btree.blocks:
        rows[b.row.id] = rows.get(b.row.id, 0) + 1
        cols[b.col.id] = cols.get(b.col.id, 0) + 1
    return max(max(rows.values()), max(cols.values()))


def block_descendants(btree, t, s):
    """``desc(t, s)``; a pair outside the block tree is its own only descendant."""
    b = btree.get(t, s)
    if b is None:
        return [(t, s)]
    out = []
    stack = [b]
    while stack:
        c = stack.pop()
        out.append((c.row, c.col))
        stack.extend(c.iter_sons())
    return out


def local_rank(block, k):
    """``k`` on admissible leaves, ``min(|t|, |s|)`` on inadmissible ones."""
    if block.kind == ADMISSIBLE:
        return k
    return min(block.row.size, block.col.size)


def max_leaf_rank(btree, k):
    return max(local_rank(b, k) for b in btree.blocks if b.is_leaf)
