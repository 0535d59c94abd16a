import pytest

from hmatlr.blocktree import (ADMISSIBLE, INADMISSIBLE, Admissibility, block_descendants,
                              sparsity_constant)
from hmatlr.errors import InvalidArgument
from hmatlr.workmodel import block_descendant_sums

from conftest import make_tree


def test_single_leaf():
    _, bt = make_tree(2, 2)
    assert len(bt) == 1 and bt.root.kind == INADMISSIBLE
    assert sparsity_constant(bt) == 1


def test_n8_weak():
    ct, bt = make_tree(8, 2)
    t1, t2 = ct.root.sons
    assert bt.get(t1, t2).kind == ADMISSIBLE and bt.get(t2, t1).kind == ADMISSIBLE
    leaves = bt.leaves()
    inad = [b for b in leaves if b.kind == INADMISSIBLE]
    assert len(inad) == 4 and all(b.row is b.col and b.row.size == 2 for b in inad)
    assert sum(b.kind == ADMISSIBLE for b in leaves) == 6
    assert len(bt) == 13
    assert sparsity_constant(bt) == 2


def test_eta_has_more_inadmissible_leaves():
    _, weak = make_tree(8, 2, "weak")
    _, eta = make_tree(8, 2, "eta", 1.0)
    count = lambda bt: sum(b.kind == INADMISSIBLE for b in bt.leaves())
    assert count(eta) > count(weak)


def test_sparsity_brute_force():
    ct, bt = make_tree(64, 4, "eta", 1.0)
    expect = max(max(sum(1 for b in bt if b.row is t) for t in ct),
                 max(sum(1 for b in bt if b.col is t) for t in ct))
    assert sparsity_constant(bt) == expect


def test_leaves_partition_index_set():
    for adm in ("weak", "eta"):
        ct, bt = make_tree(37, 3, adm)
        covered = [[0] * 37 for _ in range(37)]
        for b in bt.leaves():
            for i in range(b.row.lo, b.row.hi):
                for j in range(b.col.lo, b.col.hi):
                    covered[i][j] += 1
        assert all(v == 1 for row in covered for v in row)


def test_diagonal_never_admissible():
    for adm in ("weak", "eta"):
        ct, bt = make_tree(32, 2, adm, 1e6)
        assert all(b.kind != ADMISSIBLE for b in bt if b.row is b.col)


def test_block_descendants():
    ct, bt = make_tree(8, 2)
    t1, t2 = ct.root.sons
    assert block_descendants(bt, t1, t2) == [(t1, t2)]
    a = t1.sons[0]
    b = t2.sons[0]
    assert bt.get(a, b) is None
    assert block_descendants(bt, a, b) == [(a, b)]
    pairs = block_descendants(bt, ct.root, ct.root)
    assert len(pairs) == 13
    rows, cols = block_descendant_sums(bt, ct.root, ct.root)
    assert rows <= 2 * 3 * 8 and cols <= 2 * 3 * 8


def test_admissibility_errors():
    with pytest.raises(InvalidArgument):
        Admissibility("strong")
    with pytest.raises(InvalidArgument):
        Admissibility("eta", 0.0)
