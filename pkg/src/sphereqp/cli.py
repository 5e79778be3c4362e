"""Command-line front end: ``sphereqp solve | gen | bench | check``.

Exit codes: 0 success, 1 I/O or validation error, 2 solver failure,
3 oracle refusal, 4 check tolerance exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import oracle
from .errors import OracleLimitError, ParseError, SolverError, SphereQPError, ValidationError
from .problems import (
    GenSpec,
    bundle_paths,
    format_solution,
    gen_general,
    gen_hard,
    read_instance,
    read_instance_meta,
    write_instance,
)
from .solver import Case, SolverConfig, solve

log = logging.getLogger("sphereqp")

EXIT_OK, EXIT_IO, EXIT_SOLVER, EXIT_ORACLE, EXIT_CHECK = 0, 1, 2, 3, 4

BENCH_COLUMNS = ["dim", "case", "succ_solv", "dist_boun", "numb_iter", "runn_time"]
INSTANCE_COLUMNS = [
    "name", "dim", "case", "success", "solver_case", "dist_boun",
    "numb_iter", "runn_time", "psi_final", "error",
]


def _config(args):
    kw = {"alpha": args.alpha, "psi_tol": args.psi_tol, "seed": args.seed}
    return SolverConfig(**kw)


def _err(msg):
    print(f"sphereqp: {msg}", file=sys.stderr)


def cmd_solve(args):
    try:
        prob = read_instance(args.problem)
        cfg = _config(args)
    except (OSError, ParseError, ValidationError) as exc:
        _err(exc)
        return EXIT_IO
    try:
        sol = solve(prob, cfg)
    except SphereQPError as exc:
        _err(exc)
        return EXIT_SOLVER
    text = format_solution(sol, args.format)
    try:
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        _err(exc)
        return EXIT_IO
    return EXIT_OK if sol.converged else EXIT_SOLVER


def cmd_gen(args):
    try:
        if args.count < 0:
            raise ValidationError("count must be non-negative")
        out = Path(args.out_dir)
        for i in range(args.count):
            seed = args.seed + i
            spec = GenSpec(args.dim, args.case, seed)
            prob = gen_hard(spec)[0] if args.case == "hard" else gen_general(spec)
            name = f"{args.case}_n{args.dim}_s{seed}"
            write_instance(prob, out / name, meta={"case": args.case, "dim": args.dim, "seed": seed})
    except (OSError, ValidationError) as exc:
        _err(exc)
        return EXIT_IO
    return EXIT_OK


def _bench_one(job):
    """Run one bench instance; returns a per-instance row dict."""
    stem, cfg, repeat = job
    row = {"name": stem.name, "success": False, "error": ""}
    try:
        meta = read_instance_meta(stem)
        prob = read_instance(stem)
    except (OSError, SphereQPError) as exc:
        row.update(dim="", case="unknown", error=str(exc))
        return row
    row.update(dim=prob.n, case=meta.get("case", "unknown"))
    times = []
    try:
        for _ in range(repeat):
            t0 = time.perf_counter()
            sol = solve(prob, cfg)
            times.append(time.perf_counter() - t0)
    except SphereQPError as exc:
        row["error"] = str(exc)
        return row
    row.update(
        success=bool(sol.converged),
        solver_case=sol.case.value,
        dist_boun=sol.dist_boundary,
        numb_iter=sol.iterations_bisect,
        runn_time=float(np.mean(times)),
        psi_final=sol.psi_final,
    )
    return row


def bench_rows(rows):
    """Aggregate per-instance rows by ``(dim, case)``; means use successes only."""
    groups = {}
    for row in rows:
        groups.setdefault((row["dim"], row["case"]), []).append(row)
    out = []
    for (dim, case), members in sorted(groups.items(), key=lambda kv: (str(kv[0][0]).zfill(12), kv[0][1])):
        ok = [m for m in members if m["success"]]

        def mean(key):
            return float(np.mean([m[key] for m in ok])) if ok else float("nan")

        out.append({
            "dim": dim,
            "case": case,
            "succ_solv": len(ok),
            "dist_boun": mean("dist_boun"),
            "numb_iter": mean("numb_iter"),
            "runn_time": mean("runn_time"),
        })
    return out


def _write_csv(fh, columns, rows):
    w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: row.get(c, "") for c in columns})


def cmd_bench(args):
    suite = Path(args.suite)
    if not suite.is_dir():
        _err(f"{suite}: not a directory")
        return EXIT_IO
    try:
        cfg = _config(args)
        if args.repeat < 1 or args.jobs < 1:
            raise ValidationError("--repeat and --jobs must be at least 1")
    except ValidationError as exc:
        _err(exc)
        return EXIT_IO
    stems = sorted({bundle_paths(p)[0].with_suffix("") for p in suite.glob("*.mtx")})
    jobs = [(s, cfg, args.repeat) for s in stems]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    rows.sort(key=lambda r: r["name"])
    agg = bench_rows(rows)
    try:
        if args.out:
            out = Path(args.out)
            with open(out, "w", encoding="utf-8", newline="") as fh:
                _write_csv(fh, BENCH_COLUMNS, agg)
            inst = out.with_name(out.stem + ".instances.csv")
            with open(inst, "w", encoding="utf-8", newline="") as fh:
                _write_csv(fh, INSTANCE_COLUMNS, rows)
        else:
            buf = io.StringIO()
            _write_csv(buf, BENCH_COLUMNS, agg)
            buf.write("\n")
            _write_csv(buf, INSTANCE_COLUMNS, rows)
            sys.stdout.write(buf.getvalue())
    except OSError as exc:
        _err(exc)
        return EXIT_IO
    return EXIT_OK


def cmd_check(args):
    try:
        prob = read_instance(args.problem)
        cfg = _config(args)
    except (OSError, ParseError, ValidationError) as exc:
        _err(exc)
        return EXIT_IO
    try:
        dec = oracle.eig_full(prob.Q, limit=args.limit)
    except OracleLimitError as exc:
        _err(exc)
        return EXIT_ORACLE
    try:
        sol = solve(prob, cfg)
    except SolverError as exc:
        _err(exc)
        return EXIT_SOLVER
    sols = oracle.global_solutions(dec, prob.f, prob.r, prob.Q)
    ref = sols[0].value
    disc = abs(sol.primal_value - ref)
    dist = oracle.nearest_solution_distance(sols, sol.x)
    k = sol.kkt
    print(f"case                 {sol.case.value}")
    print(f"oracle_value         {ref!r}")
    print(f"solver_value         {sol.primal_value!r}")
    print(f"discrepancy          {disc:.3e}")
    print(f"distance_to_oracle   {dist:.3e}")
    print(f"kkt_stationarity     {k.stationarity:.3e}")
    print(f"kkt_feasibility      {k.feasibility:.3e}")
    print(f"kkt_complementarity  {k.complementarity:.3e}")
    print(f"kkt_curvature_cert   {k.curvature_cert:.3e}")
    if disc > args.tol * (1.0 + abs(ref)):
        _err(f"discrepancy {disc:.3e} exceeds tolerance {args.tol:g}*(1+|value|)")
        return EXIT_CHECK
    return EXIT_OK


def _solver_flags(p):
    p.add_argument("--alpha", type=float, default=1e-4, help="hard-case perturbation size")
    p.add_argument("--psi-tol", type=float, default=1e-8, help="bisection tolerance on psi")
    p.add_argument("--seed", type=int, default=0, help="Lanczos start vector seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="sphereqp", description="Ball-constrained quadratic minimization.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance bundle")
    p.add_argument("--problem", required=True, help="bundle stem, .mtx or .rhs path")
    _solver_flags(p)
    p.add_argument("--out", help="write the solution document here instead of stdout")
    p.add_argument("--format", choices=["text", "json"], default="json")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen", help="generate random instance bundles")
    p.add_argument("--case", choices=["general", "hard"], default="general")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="solve every bundle in a directory and tabulate")
    p.add_argument("suite", help="directory of instance bundles")
    _solver_flags(p)
    p.add_argument("--repeat", type=int, default=1, help="timed solves per instance")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="aggregate CSV path; per-instance rows go to <stem>.instances.csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="solve and compare against the eigendecomposition oracle")
    p.add_argument("--problem", required=True)
    _solver_flags(p)
    p.add_argument("--tol", type=float, default=1e-6, help="allowed discrepancy relative to 1+|value|")
    p.add_argument("--limit", type=int, default=oracle.ORACLE_LIMIT, help="largest n the oracle accepts")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except SphereQPError as exc:
        _err(exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
