"""Property tests for the structural, counting and numerical invariants."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from hmatlr.blocktree import ADMISSIBLE, sparsity_constant
from hmatlr.cluster import build_cluster_tree, descendants
from hmatlr.dense import (LOWER, UPPER, FlopCounter, dense_invert_triangular, dense_lr,
                          dense_rl_product, truncate_lowrank)
from hmatlr.harness import ProblemSpec, run_core
from hmatlr.hmatrix import LOWRANK, HMatrix, addeval, update
from hmatlr.workmodel import (WorkModel, dense_invert_count, dense_lr_count, verify_all)

from conftest import dominant, make_tree

FAST = settings(max_examples=40, deadline=None,
                suppress_health_check=[HealthCheck.too_slow])
SLOW = settings(max_examples=12, deadline=None,
                suppress_health_check=[HealthCheck.too_slow])

sizes = st.integers(1, 200)
leaf_sizes = st.integers(1, 12)
adms = st.sampled_from(["weak", "eta"])


@FAST
@given(sizes, leaf_sizes)
def test_cluster_tree_shape(n, rho):
    ct = build_cluster_tree(n, rho)
    leaves = sorted(ct.leaves(), key=lambda c: c.lo)
    assert leaves[0].lo == 0 and leaves[-1].hi == n
    assert all(a.hi == b.lo for a, b in zip(leaves, leaves[1:]))
    for c in ct:
        if c.is_leaf:
            assert 1 <= c.size <= rho
        else:
            a, b = c.sons
            assert c.size > rho and a.size == math.ceil(c.size / 2) and a.hi == b.lo
    assert sum(c.size for c in descendants(ct.root)) <= (ct.depth + 1) * n
    # the largest cluster on level l has ceil(n / 2**l) indices
    assert ct.depth == next(l for l in range(n + 1) if -(-n // 2 ** l) <= rho)


@FAST
@given(st.integers(1, 100), leaf_sizes, adms)
def test_block_leaves_partition(n, rho, adm):
    ct, bt = make_tree(n, rho, adm)
    area = 0
    for b in bt.leaves():
        area += b.row.size * b.col.size
        if b.row is b.col:
            assert b.kind != ADMISSIBLE
        if b.kind != ADMISSIBLE:
            assert b.row.is_leaf or b.col.is_leaf
    assert area == n * n
    assert sparsity_constant(bt) >= 1


@FAST
@given(st.integers(1, 64))
def test_dense_counts_exact(n):
    M = dominant(n, seed=n)
    fc = FlopCounter()
    L, R = dense_lr(M, flops=fc)
    assert fc.total == dense_lr_count(n)
    fc = FlopCounter()
    dense_invert_triangular(LOWER, L, flops=fc)
    assert fc.total == dense_invert_count(n)
    fc = FlopCounter()
    dense_invert_triangular(UPPER, R, flops=fc)
    assert fc.total == dense_invert_count(n)
    fc = FlopCounter()
    dense_rl_product(R, L, flops=fc)
    assert fc.total == dense_lr_count(n)


@FAST
@given(st.integers(1, 30), st.integers(0, 2 ** 32 - 1))
def test_dense_lr_reconstructs(n, seed):
    M = dominant(n, seed)
    L, R = dense_lr(M)
    assert np.linalg.norm(L @ R - M) <= 1e-13 * np.linalg.norm(M)
    Li = dense_invert_triangular(LOWER, L)
    Ri = dense_invert_triangular(UPPER, R)
    Gi = dense_rl_product(Ri, Li)
    assert np.linalg.norm(Gi @ M - np.eye(n)) <= 1e-12 * n


@FAST
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 8), st.integers(0, 2 ** 32 - 1))
def test_truncation_is_svd_optimal(m, n, k, seed):
    M = np.random.default_rng(seed).standard_normal((m, n))
    C, D = truncate_lowrank(M, k, 0.0)
    s = np.linalg.svd(M, compute_uv=False)
    assert C.shape[1] <= k
    tail = np.sqrt((s[min(k, len(s)):] ** 2).sum())
    assert abs(np.linalg.norm(M - C @ D.T) - tail) <= 1e-10 * max(1.0, s[0])


@FAST
@given(st.integers(1, 80), leaf_sizes, adms, st.integers(0, 6))
def test_work_values_are_deterministic_integers(n, rho, adm, k):
    _, bt = make_tree(n, rho, adm)
    a, b = WorkModel(bt, k), WorkModel(bt, k)
    r = bt.ctree.root
    for wm in (a, b):
        wm.w_factor_invert(r)
    va = (a.w_mm(r, r, r), a.w_ev(r, r, 3), a.w_up(r, r, 2), a.w_factor_invert(r))
    vb = (b.w_mm(r, r, r), b.w_ev(r, r, 3), b.w_up(r, r, 2), b.w_factor_invert(r))
    assert va == vb
    assert all(isinstance(v, int) and v >= 0 for v in va[:3] + va[3])


@SLOW
@given(st.integers(1, 96), st.integers(1, 8), adms, st.integers(1, 5))
def test_complexity_inequalities_hold(n, rho, adm, k):
    _, bt = make_tree(n, rho, adm)
    rep = verify_all(bt, k)
    assert rep["passed"], {k: v for k, v in rep["checks"].items() if not v["passed"]}


@SLOW
@given(st.integers(2, 48), st.integers(1, 8), adms, st.integers(1, 5),
       st.sampled_from(["logkernel", "diagdom", "randlowrank"]), st.integers(0, 1000))
def test_measured_flops_dominated(n, rho, adm, k, gen, seed):
    rep, _ = run_core(ProblemSpec(n=n, rho=rho, adm=adm, k=k, generator=gen, seed=seed))
    bad = {name: d for name, d in rep["domination"].items() if not d["passed"]}
    assert not bad


@FAST
@given(st.integers(2, 40), st.integers(1, 6), adms, st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_hmatrix_eval_and_update(n, rho, adm, k, seed):
    rng = np.random.default_rng(seed)
    _, bt = make_tree(n, rho, adm)
    H = HMatrix.from_dense(rng.standard_normal((n, n)), bt, k)
    assert H.max_lowrank_rank() <= k
    root = bt.ctree.root
    Y = rng.standard_normal((n, 2))
    X = addeval(1.0, root, root, H, Y, np.zeros((n, 2)))
    D = H.to_dense()
    assert np.linalg.norm(X - D @ Y) <= 1e-12 * np.linalg.norm(D) * np.linalg.norm(Y)
    update(root, root, rng.standard_normal((n, 3)), rng.standard_normal((n, 3)), H)
    assert all(nd.rank <= k for nd in H.leaves() if nd.kind == LOWRANK)
