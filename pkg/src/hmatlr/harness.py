"""Problem generators and the verify / bench drivers."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .blocktree import Admissibility, build_block_tree
from .cluster import build_cluster_tree, tree_stats
from .dense import LOWER, UPPER, FlopCounter
from .errors import HMatrixError, InvalidArgument
from .hmatrix import HMatrix, addeval, addevaltrans, addmul, update
from .triangular import (invert_inplace, llsolve, lrsolve,
                         pipeline_inverse, rlsolve, rrsolve, solve_matrix)
from .workmodel import WorkConstants, WorkModel, verify_all

SCHEMA_VERSION = 1
GENERATORS = ("logkernel", "diagdom", "identity", "randlowrank")


@dataclass(frozen=True)
class ProblemSpec:
    n: int = 64
    rho: int = 4
    adm: str = "weak"
    eta: float = 1.0
    k: int = 8
    eps: float = 1e-8
    generator: str = "logkernel"
    seed: int = 0
    shift: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.rho < 1:
            raise InvalidArgument(f"need n >= 1 and rho >= 1, got n={self.n}, rho={self.rho}")
        if self.k < 0 or self.eps < 0:
            raise InvalidArgument("rank and eps must be non-negative")
        if self.generator not in GENERATORS:
            raise InvalidArgument(f"unknown generator {self.generator!r}")
        self.admissibility()

    def admissibility(self):
        return Admissibility(self.adm, self.eta)


def _dominant_diagonal(M, shift):
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, np.abs(M).sum(axis=1) + shift)
    return M


def generate(spec):
    """Dense test matrix; every generator except ``identity`` is strictly
    diagonally dominant for ``shift > 0``."""
    n = spec.n
    if spec.generator == "identity":
        return np.eye(n)
    if spec.generator == "logkernel":
        x = (np.arange(n) + 0.5) / n
        d = np.abs(x[:, None] - x[None, :])
        np.fill_diagonal(d, 1.0)
        return _dominant_diagonal(np.log(d), spec.shift)
    rng = np.random.default_rng(spec.seed)
    if spec.generator == "diagdom":
        return _dominant_diagonal(rng.uniform(-1.0, 1.0, size=(n, n)), spec.shift)
    if spec.generator == "randlowrank":
        r = max(1, min(spec.k, n))
        U = rng.standard_normal((n, r))
        V = rng.standard_normal((n, r))
        return _dominant_diagonal(U @ V.T / r, spec.shift)
    raise InvalidArgument(f"unknown generator {spec.generator!r}")


def build_problem(spec):
    ctree = build_cluster_tree(spec.n, spec.rho)
    btree = build_block_tree(ctree, spec.admissibility())
    return ctree, btree


def _rel(a, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))


class _Timer:
    def __init__(self):
        self.times = {}

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.times[name] = time.perf_counter() - self.t0

        return _Ctx()


def _bound(flops, w):
    return {"flops": flops.total, "bound": int(w), "ratio": flops.total / w if w else None,
            "passed": flops.total <= w}


def run_core(spec, consts=None, full=True):
    """Run the numerical pipeline; returns ``(report, wall_times)``.

    ``full`` adds the standalone kernel runs (matrix-vector, update,
    multiplication, H-matrix solves) needed for the domination checks.
    """
    consts = consts or WorkConstants()
    ctree, btree = build_problem(spec)
    root = ctree.root
    wm = WorkModel(btree, spec.k, consts)
    p, leaves, max_leaf = tree_stats(ctree)
    tc = wm.tree_constants()
    timer = _Timer()
    rng = np.random.default_rng(spec.seed + 1)

    M = generate(spec)
    with timer("compress"):
        fc_comp = FlopCounter()
        G = HMatrix.from_dense(M, btree, spec.k, spec.eps, fc_comp)
    Gd = G.to_dense()
    n = spec.n
    eye = np.eye(n)

    flops = {"compress": fc_comp.total}
    dom = {}
    res = {"compression": {"value": _rel(Gd, M), "oracle": "dense generator matrix"}}

    with timer("pipeline"):
        L, R, Lt, Rt, Gt, phases = pipeline_inverse(G)
    w_dc, w_li, w_ri, w_in = wm.w_factor_invert(root)
    for name, w in (("lrdecomp", w_dc), ("linvert", w_li), ("rinvert", w_ri), ("lrinvert", w_in)):
        flops[name] = phases[name].total
        dom[name] = _bound(phases[name], w)
    Ld, Rd, Gtd = L.to_dense(), R.to_dense(), Gt.to_dense()
    res["factorization"] = {"value": _rel(Ld @ Rd, Gd), "oracle": "to_dense(G)"}
    res["lower_inverse"] = {"value": float(np.linalg.norm(Ld @ Lt.to_dense() - eye)),
                            "oracle": "identity"}
    res["upper_inverse"] = {"value": float(np.linalg.norm(Rd @ Rt.to_dense() - eye)),
                            "oracle": "identity"}
    res["inverse"] = {"value": float(np.linalg.norm(Gd @ Gtd - eye)), "oracle": "identity"}

    with timer("invert_inplace"):
        H = G.copy()
        fc = FlopCounter()
        invert_inplace(root, H, fc)
    flops["invert_inplace"] = fc.total
    dom["invert_inplace"] = _bound(fc, w_dc + w_li + w_ri + w_in)
    res["inplace_vs_pipeline"] = {"value": _rel(H.to_dense(), Gtd), "oracle": "pipeline inverse"}

    with timer("solve"):
        y = rng.standard_normal(n)
        fl, fr = FlopCounter(), FlopCounter()
        z = solve_matrix(LOWER, False, root, L, y, flops=fl)
        x = solve_matrix(UPPER, False, root, R, z, flops=fr)
    dom["lsolve"] = _bound(fl, wm.w_ls(root, 1))
    dom["rsolve"] = _bound(fr, wm.w_rs(root, 1))
    res["solve"] = {"value": _rel(Gd @ x, y), "oracle": "to_dense(G) applied to solution"}

    if full:
        ell = max(spec.k, 1)
        Y = rng.standard_normal((n, ell))
        for name, fn in (("addeval", addeval), ("addevaltrans", addevaltrans)):
            fc = FlopCounter()
            fn(1.0, root, root, G, Y, np.zeros((n, ell)), fc)
            dom[name] = _bound(fc, wm.w_ev(root, root, ell))
        for name, side, trans, w in (("lsolvetrans", LOWER, True, wm.w_ls(root, ell)),
                                     ("rsolvetrans", UPPER, True, wm.w_rs(root, ell))):
            fc = FlopCounter()
            solve_matrix(side, trans, root, L if side == LOWER else R, Y, flops=fc)
            dom[name] = _bound(fc, w)

        with timer("update"):
            U = G.copy()
            fc = FlopCounter()
            update(root, root, rng.standard_normal((n, ell)), rng.standard_normal((n, ell)), U, fc)
        dom["update"] = _bound(fc, wm.w_up(root, root, ell))

        with timer("addmul"):
            Z = HMatrix.zeros(btree, spec.k, spec.eps)
            fc = FlopCounter()
            addmul(1.0, root, root, root, G, G, Z, fc)
        flops["addmul"] = fc.total
        dom["addmul"] = _bound(fc, wm.w_mm(root, root, root))
        res["addmul"] = {"value": _rel(Z.to_dense(), Gd @ Gd), "oracle": "to_dense(G)^2"}

        with timer("hsolve"):
            for name, fn, T, w in (("llsolve", llsolve, L, wm.w_ll(root, root)),
                                   ("rlsolve", rlsolve, R, wm.w_rl(root, root)),
                                   ("lrsolve", lrsolve, L, wm.w_lr(root, root)),
                                   ("rrsolve", rrsolve, R, wm.w_rr(root, root))):
                fc = FlopCounter()
                fn(root, root, T, G, HMatrix.zeros(btree, spec.k, spec.eps), flops=fc)
                dom[name] = _bound(fc, w)

    report = {
        "schema_version": SCHEMA_VERSION,
        "problem": asdict(spec),
        "tree": {"p": p, "leaves": leaves, "max_leaf_size": max_leaf, "C_sp": tc["C_sp"],
                 "k_hat": tc["k_hat"], "k_hat_leaves": tc["k_hat_leaves"],
                 "blocks": len(btree), "storage": G.storage(),
                 "max_rank": G.max_lowrank_rank()},
        "constants": consts.as_dict(),
        "residuals": res,
        "flops": flops,
        "work": {"W_dc": w_dc, "W_li": w_li, "W_ri": w_ri, "W_in": w_in,
                 "W_mm": wm.w_mm(root, root, root),
                 "mm_bound": wm.mm_upper_bound(root, root, root)},
        "domination": dom,
    }
    return report, timer.times


def run_verify(spec, consts=None):
    """Full verification run; the report's ``passed`` covers every check."""
    consts = consts or WorkConstants()
    t0 = time.perf_counter()
    try:
        report, times = run_core(spec, consts, full=True)
        ctree, btree = build_problem(spec)
        t1 = time.perf_counter()
        report["checks"] = verify_all(btree, spec.k, consts)["checks"]
        times["work_model"] = time.perf_counter() - t1
        report["passed"] = (all(c["passed"] for c in report["checks"].values())
                            and all(d["passed"] for d in report["domination"].values()))
        report["error"] = None
    except HMatrixError as exc:
        report = {"schema_version": SCHEMA_VERSION, "problem": asdict(spec),
                  "passed": False, "error": f"{type(exc).__name__}: {exc}"}
        times = {}
    times["total"] = time.perf_counter() - t0
    report["wall_time"] = times
    return report


BENCH_FIELDS = ["n", "rho", "adm", "eta", "k", "eps", "generator", "p", "C_sp", "k_hat",
                "flops_lrdecomp", "flops_linvert", "flops_rinvert", "flops_lrinvert",
                "flops_invert_inplace", "W_mm", "mm_bound_ratio", "res_factorization",
                "res_inverse", "error"]


def bench_row(spec, consts=None):
    row = {"n": spec.n, "rho": spec.rho, "adm": spec.adm, "eta": spec.eta, "k": spec.k,
           "eps": spec.eps, "generator": spec.generator}
    try:
        report, _ = run_core(spec, consts, full=False)
    except HMatrixError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    tree, fl, work, res = report["tree"], report["flops"], report["work"], report["residuals"]
    row.update({"p": tree["p"], "C_sp": tree["C_sp"], "k_hat": tree["k_hat"],
                "flops_lrdecomp": fl["lrdecomp"], "flops_linvert": fl["linvert"],
                "flops_rinvert": fl["rinvert"], "flops_lrinvert": fl["lrinvert"],
                "flops_invert_inplace": fl["invert_inplace"], "W_mm": work["W_mm"],
                "mm_bound_ratio": work["W_mm"] / work["mm_bound"],
                "res_factorization": res["factorization"]["value"],
                "res_inverse": res["inverse"]["value"], "error": ""})
    return row


def run_bench(specs, consts=None):
    """One CSV row per spec; failures are recorded in the ``error`` column."""
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    for spec in specs:
        writer.writerow(bench_row(spec, consts))
    return out.getvalue()


def spec_grid(base, ns, rhos, ks):
    return [replace(base, n=n, rho=rho, k=k) for n in ns for rho in rhos for k in ks]
