"""Command line entry point: ``hmatlr verify | bench | dump``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace

import numpy as np

from .errors import HMatrixError
from .harness import GENERATORS, ProblemSpec, build_problem, generate, run_bench, run_verify
from .hmatrix import HMatrix, dump_binary
from .workmodel import WorkConstants, verify_all


def _problem_args(p, multi=False):
    nargs = "+" if multi else None
    p.add_argument("--n", type=int, nargs=nargs, default=[64] if multi else 64)
    p.add_argument("--leaf-size", type=int, nargs=nargs, default=[4] if multi else 4,
                   help="resolution rho, the largest leaf cluster")
    p.add_argument("--adm", choices=("weak", "eta"), default="weak")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--rank", type=int, nargs=nargs, default=[8] if multi else 8)
    p.add_argument("--eps", type=float, default=1e-8, help="relative truncation tolerance")
    p.add_argument("--generator", choices=GENERATORS, default="logkernel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shift", type=float, default=1.0)
    p.add_argument("--c-ad", type=int, default=WorkConstants.C_ad)
    p.add_argument("--c-mg-prime", type=int, default=WorkConstants.C_mg_prime)
    p.add_argument("--out", help="output file (default: stdout)")


def _spec(args, n=None, rho=None, k=None):
    return ProblemSpec(n=args.n if n is None else n,
                       rho=args.leaf_size if rho is None else rho,
                       adm=args.adm, eta=args.eta,
                       k=args.rank if k is None else k, eps=args.eps,
                       generator=args.generator, seed=args.seed, shift=args.shift)


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="hmatlr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="accuracy, flop domination and work-model checks")
    _problem_args(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--model-only", action="store_true",
                   help="only the work-model checks, no numerics")

    p = sub.add_parser("bench", help="flop and residual table over a grid")
    _problem_args(p, multi=True)
    p.add_argument("--format", choices=("json", "csv"), default="csv")

    p = sub.add_parser("dump", help="write trees or a compressed matrix")
    _problem_args(p)
    p.add_argument("--dump-tree", action="store_true", help="cluster tree as JSON")
    p.add_argument("--dump-blocks", action="store_true", help="block tree as JSON")
    p.add_argument("--dump-hmatrix", metavar="PATH",
                   help="leaf-wise binary dump of the compressed generator matrix")
    return parser


def _flatten(report):
    row = {}
    for key in ("residuals", "domination", "checks"):
        for name, entry in (report.get(key) or {}).items():
            for field in ("value", "passed", "ratio", "max_ratio"):
                if field in entry:
                    row[f"{key}.{name}.{field}"] = entry[field]
    row["passed"] = report["passed"]
    row["error"] = report.get("error") or ""
    return row


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        consts = WorkConstants(args.c_ad, args.c_mg_prime)
        if args.command == "verify":
            spec = _spec(args)
            if args.model_only:
                _, btree = build_problem(spec)
                report = verify_all(btree, spec.k, consts)
                report["schema_version"] = 1
            else:
                report = run_verify(spec, consts)
            if args.format == "json":
                _emit(json.dumps(report, indent=2) + "\n", args.out)
            else:
                row = _flatten(report) if "residuals" in report or "error" in report else {
                    f"checks.{k}.passed": v["passed"] for k, v in report["checks"].items()}
                keys = list(row)
                _emit(",".join(keys) + "\n" + ",".join(str(row[k]) for k in keys) + "\n",
                      args.out)
            return 0 if report["passed"] else 1

        if args.command == "bench":
            base = _spec(args, n=args.n[0], rho=args.leaf_size[0], k=args.rank[0])
            specs = [replace(base, n=n, rho=rho, k=k)
                     for n in args.n for rho in args.leaf_size for k in args.rank]
            text = run_bench(specs, consts)
            rows = list(csv.DictReader(io.StringIO(text)))
            if args.format == "json":
                text = json.dumps({"schema_version": 1, "rows": rows}, indent=2) + "\n"
            _emit(text, args.out)
            return 1 if any(row["error"] for row in rows) else 0

        spec = _spec(args)
        ctree, btree = build_problem(spec)
        if args.dump_hmatrix:
            H = HMatrix.from_dense(generate(spec), btree, spec.k, spec.eps)
            with open(args.dump_hmatrix, "wb") as fh:
                dump_binary(H, fh)
        out = {"schema_version": 1}
        if args.dump_tree or not (args.dump_blocks or args.dump_hmatrix):
            out["cluster_tree"] = ctree.to_json()
        if args.dump_blocks or not (args.dump_tree or args.dump_hmatrix):
            out["block_tree"] = btree.to_json()
        if len(out) > 1:
            _emit(json.dumps(out) + "\n", args.out)
        return 0
    except (HMatrixError, OSError, np.linalg.LinAlgError) as exc:
        print(f"hmatlr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
