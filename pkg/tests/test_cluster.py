import pytest

from hmatlr.cluster import build_cluster_tree, descendants, tree_stats
from hmatlr.errors import InvalidArgument, UnknownCluster


def test_single_node():
    tree = build_cluster_tree(1, 1)
    assert len(tree) == 1 and tree.depth == 0 and tree.root.is_leaf


def test_n8_rho2():
    tree = build_cluster_tree(8, 2)
    assert tree.depth == 2 and len(tree) == 7
    assert all(c.size == 2 and c.level == 2 for c in tree.leaves())


def test_n5_rho2_ceil_split():
    tree = build_cluster_tree(5, 2)
    a, b = tree.root.sons
    assert (a.lo, a.hi, b.lo, b.hi) == (0, 3, 3, 5)
    assert [(c.lo, c.hi) for c in a.sons] == [(0, 2), (2, 3)]
    assert b.is_leaf


def test_descendants():
    tree = build_cluster_tree(8, 2)
    leaf = tree.leaves()[0]
    assert descendants(leaf) == [leaf]
    d = descendants(tree.root)
    assert len(d) == 7 and sum(c.size for c in d) == 24 == 3 * 8


@pytest.mark.parametrize("n,rho,expect", [(1, 1, (0, 1, 1)), (8, 2, (2, 4, 2)), (5, 2, (2, 3, 2))])
def test_stats(n, rho, expect):
    assert tree_stats(build_cluster_tree(n, rho)) == expect


def test_errors():
    with pytest.raises(InvalidArgument):
        build_cluster_tree(0, 2)
    with pytest.raises(InvalidArgument):
        build_cluster_tree(4, 0)
    with pytest.raises(UnknownCluster):
        build_cluster_tree(4, 2)[99]


def test_json_roundtrip_fields():
    js = build_cluster_tree(5, 2).to_json()
    assert js["clusters"][0] == {"id": 0, "range": [0, 5], "level": 0, "sons": [1, 4]}
