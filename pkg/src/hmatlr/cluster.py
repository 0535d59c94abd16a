"""Binary cluster trees over contiguous index ranges."""
from __future__ import annotations

import math

from .errors import InvalidArgument, UnknownCluster


class Cluster:
    """Node of a cluster tree labelled with the index range ``[lo, hi)``."""

    __slots__ = ("id", "lo", "hi", "level", "sons", "parent")

    def __init__(self, id, lo, hi, level, parent=None):
        self.id = id
        self.lo = lo
        self.hi = hi
        self.level = level
        self.sons = ()
        self.parent = parent

    @property
    def size(self):
        return self.hi - self.lo

    @property
    def is_leaf(self):
        return not self.sons

    def __repr__(self):
        return f"Cluster({self.id}, [{self.lo},{self.hi}))"


class ClusterTree:
    def __init__(self, root, clusters, n, rho):
        self.root = root
        self.clusters = clusters
        self.n = n
        self.rho = rho
        self.depth = max(c.level for c in clusters)

    def __len__(self):
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def __getitem__(self, cid):
        try:
            return self.clusters[cid]
        except (IndexError, TypeError):
            raise UnknownCluster(cid) from None

    def leaves(self):
        return [c for c in self.clusters if c.is_leaf]

    def points(self):
        """Unit-interval coordinates ``(i + 0.5) / n`` of the indices."""
        return [(i + 0.5) / self.n for i in range(self.n)]

    def to_json(self):
        return {
            "n": self.n,
            "rho": self.rho,
            "depth": self.depth,
            "root": self.root.id,
            "clusters": [
                {"id": c.id, "range": [c.lo, c.hi], "level": c.level,
                 "sons": [s.id for s in c.sons]}
                for c in self.clusters
            ],
        }


def build_cluster_tree(n, rho):
    """Balanced bisection of ``[0, n)``; a cluster of size ``s > rho`` splits at ``lo + ceil(s/2)``."""
    if n < 1 or rho < 1:
        raise InvalidArgument(f"need n >= 1 and rho >= 1, got n={n}, rho={rho}")
    clusters = []

    def make(lo, hi, level, parent):
        c = Cluster(len(clusters), lo, hi, level, parent)
        clusters.append(c)
        size = hi - lo
        if size > rho:
            mid = lo + math.ceil(size / 2)
            c.sons = (make(lo, mid, level + 1, c), make(mid, hi, level + 1, c))
        return c

    root = make(0, n, 0, None)
    return ClusterTree(root, clusters, n, rho)


def descendants(t):
    out = [t]
    stack = list(reversed(t.sons))
    while stack:
        c = stack.pop()
        out.append(c)
        stack.extend(reversed(c.sons))
    return out


def tree_stats(tree):
    leaves = tree.leaves()
    return tree.depth, len(leaves), max(c.size for c in leaves)
