"""Acceptance criteria 1-10.

Every criterion prints one PASS/FAIL line.  Under pytest the lines are
collected into an "acceptance criteria" section of the terminal summary;
``python tests/test_acceptance.py`` prints them directly.
"""
import functools
import sys
import time

import numpy as np
import pytest

from hmatlr.blocktree import Admissibility, build_block_tree
from hmatlr.cluster import build_cluster_tree
from hmatlr.dense import (LOWER, UPPER, FlopCounter, dense_invert_triangular, dense_lr,
                          dense_rl_product)
from hmatlr.harness import ProblemSpec, generate, run_core
from hmatlr.hmatrix import HMatrix
from hmatlr.triangular import invert_inplace, pipeline_inverse
from hmatlr.workmodel import WorkModel, dense_invert_count, dense_lr_count, verify_all

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

GRID = [(n, rho, adm, k) for n in (8, 64, 256, 1024) for rho in (2, 4, 16)
        for adm in ("weak", "eta") for k in (1, 4)]

# frozen from the dense-oracle calibration run of the criterion 9 problem
# (measured 2.8e-10 and 5.0e-7)
FACTORIZATION_TOL = 1e-8
INVERSE_TOL = 1e-5


def report(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def _tree(n, rho, adm):
    return build_block_tree(build_cluster_tree(n, rho), Admissibility(adm, 1.0))


# -- 1 ---------------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    bad = []
    for n in range(1, 65):
        M = generate(ProblemSpec(n=n, rho=n, generator="diagdom", seed=n))
        fc = FlopCounter()
        L, R = dense_lr(M, flops=fc)
        got = [fc.total]
        for side, T in ((LOWER, L), (UPPER, R)):
            fc = FlopCounter()
            dense_invert_triangular(side, T, flops=fc)
            got.append(fc.total)
        fc = FlopCounter()
        dense_rl_product(R, L, flops=fc)
        got.append(fc.total)
        want = [n * (4 * n * n - 3 * n - 1) // 6, n * (2 * n * n + 4) // 6,
                n * (2 * n * n + 4) // 6, n * (4 * n * n - 3 * n - 1) // 6]
        assert want == [dense_lr_count(n), dense_invert_count(n),
                        dense_invert_count(n), dense_lr_count(n)]
        if got != want:
            bad.append((n, got, want))
    dt = time.perf_counter() - t0
    return not bad and dt < 1.0, f"n=1..64, mismatches={len(bad)}, time={dt:.2f}s (< 1 s)"


# -- 2-6: one exhaustive pass of verify_all over the grid -------------------

@functools.lru_cache(maxsize=None)
def model_grid():
    t0 = time.perf_counter()
    reports = {case: verify_all(_tree(*case[:3]), case[3]) for case in GRID}
    return reports, time.perf_counter() - t0


def _summary(names):
    reports, dt = model_grid()
    checks = violations = 0
    ratio = 0.0
    for rep in reports.values():
        for name in names:
            c = rep["checks"][name]
            checks += c["checks"]
            violations += c["violations"]
            ratio = max(ratio, c["max_ratio"])
    return checks, violations, ratio, dt


def criterion_2():
    checks, viol, ratio, dt = _summary(["solve_vectors"])
    return viol == 0 and dt < 10.0, (f"{len(GRID)} trees, {checks} comparisons, "
                                     f"violations={viol}, max ratio={ratio:.3f}, "
                                     f"grid time={dt:.2f}s (< 10 s)")


def criterion_3():
    checks, viol, ratio, _ = _summary(["forward_backward_left", "forward_backward_right"])
    return viol == 0, f"{checks} comparisons, violations={viol}, max ratio={ratio:.3f}"


def criterion_4():
    checks, viol, ratio, _ = _summary(["combined", "dense_base_identity"])
    bt = _tree(2, 2, "weak")
    wm = WorkModel(bt, 1)
    t = bt.ctree.root
    anchor = (sum(wm.w_factor_invert(t)), wm.w_mm(t, t, t))
    ok = viol == 0 and anchor == (14, 36)
    return ok, (f"{checks} comparisons, violations={viol}, max ratio={ratio:.3f}, "
                f"anchor |t|=2: {anchor[0]} <= {anchor[1]}")


def criterion_5():
    checks, viol, ratio, _ = _summary(["matrix_multiplication"])
    return viol == 0, f"{checks} product-tree nodes, violations={viol}, tightness={ratio:.2e}"


def criterion_6():
    checks, viol, ratio, _ = _summary(["cluster_bound", "block_bound", "product_bound"])
    return viol == 0, f"{checks} comparisons, violations={viol}, max ratio={ratio:.3f}"


# -- 7 ---------------------------------------------------------------------

def criterion_7():
    t0 = time.perf_counter()
    runs = bad = 0
    worst = (0.0, None)
    failures = []
    for n, rho, adm, k in GRID:
        rep, _ = run_core(ProblemSpec(n=n, rho=rho, adm=adm, k=k, eps=1e-8))
        runs += 1
        for name, d in rep["domination"].items():
            if not d["passed"]:
                bad += 1
                failures.append((n, rho, adm, k, name))
            if d["ratio"] is not None and d["ratio"] > worst[0]:
                worst = (d["ratio"], name)
    dt = time.perf_counter() - t0
    return bad == 0, (f"{runs} runs, violations={bad} {failures[:3]}, "
                      f"max flops/W={worst[0]:.3f} ({worst[1]}), time={dt:.0f}s")


# -- 8 ---------------------------------------------------------------------

def _rel(a, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / nb if nb else np.linalg.norm(a)


def criterion_8():
    worst = 0.0
    cases = 0
    for n in (1, 2, 3, 5, 8, 13, 16, 31, 32):
        for gen in ("diagdom", "logkernel"):
            M = generate(ProblemSpec(n=n, rho=n, generator=gen, seed=n))
            G = HMatrix.from_dense(M, _tree(n, n, "weak"), 4)
            L, R, Lt, Rt, Gt, _ = pipeline_inverse(G)
            Ld, Rd = dense_lr(M)
            Li = dense_invert_triangular(LOWER, Ld)
            Ri = dense_invert_triangular(UPPER, Rd)
            Gi = dense_rl_product(Ri, Li)
            H = G.copy()
            invert_inplace(G.ctree.root, H)
            errs = [_rel(L.to_dense(), Ld), _rel(R.to_dense(), Rd), _rel(Lt.to_dense(), Li),
                    _rel(Rt.to_dense(), Ri), _rel(Gt.to_dense(), Gi), _rel(H.to_dense(), Gi)]
            worst = max(worst, *errs)
            cases += 1
    return worst <= 1e-12, f"{cases} single-block cases, max relative error={worst:.1e} (<= 1e-12)"


# -- 9, 10 -----------------------------------------------------------------

CRIT9 = ProblemSpec(n=256, rho=8, adm="eta", eta=1.0, k=8, eps=1e-8, generator="logkernel")


@functools.lru_cache(maxsize=None)
def criterion_9_run():
    t0 = time.perf_counter()
    rep, _ = run_core(CRIT9, full=False)
    return rep, time.perf_counter() - t0


def criterion_9():
    rep, dt = criterion_9_run()
    fact = rep["residuals"]["factorization"]["value"]
    inv = rep["residuals"]["inverse"]["value"]
    ok = fact < FACTORIZATION_TOL and inv < INVERSE_TOL and dt < 30.0
    return ok, (f"|LR-G|/|G|={fact:.1e} (< {FACTORIZATION_TOL:g}), "
                f"|G Gt - I|={inv:.1e} (< {INVERSE_TOL:g}), time={dt:.1f}s (< 30 s)")


def criterion_10():
    exact = 0.0
    for n, rho, adm, k in ((8, 8, "weak", 1), (32, 32, "weak", 1), (32, 4, "weak", 32),
                           (48, 4, "eta", 48), (64, 8, "eta", 64)):
        spec = ProblemSpec(n=n, rho=rho, adm=adm, k=k, eps=0.0)
        rep, _ = run_core(spec, full=False)
        exact = max(exact, rep["residuals"]["inplace_vs_pipeline"]["value"])
    rep, _ = criterion_9_run()
    ratios = [rep["residuals"]["inplace_vs_pipeline"]["value"] / CRIT9.eps]
    for adm in ("weak", "eta"):
        spec = ProblemSpec(n=128, rho=4, adm=adm, k=6, eps=1e-6, generator="diagdom")
        rep, _ = run_core(spec, full=False)
        ratios.append(rep["residuals"]["inplace_vs_pipeline"]["value"] / spec.eps)
    truncated = max(ratios)
    ok = exact <= 1e-12 and truncated <= 10.0
    return ok, (f"truncation-free max rel diff={exact:.1e} (<= 1e-12), "
                f"truncated max rel diff/eps={truncated:.1e} (<= 10)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(number):
    passed, detail = CRITERIA[number - 1]()
    assert report(number, passed, detail), detail


if __name__ == "__main__":
    results = [report(i + 1, *fn()) for i, fn in enumerate(CRITERIA)]
    sys.exit(0 if all(results) else 1)
