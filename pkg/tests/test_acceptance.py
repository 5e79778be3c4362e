"""Acceptance checks, one per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import example_easy, example_hard, random_instance, spd_instance  # noqa: E402
from sphereqp import dual, oracle, solver  # noqa: E402
from sphereqp.linalg import lanczos_smallest  # noqa: E402
from sphereqp.problems import GenSpec, gen_general, gen_hard, read_instance, write_instance  # noqa: E402
from sphereqp.solver import Case, SolverConfig, accuracy_for_alpha, solve, solve_with_p  # noqa: E402


def report(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title} | {detail}"
    print(line, flush=True)
    return ok


def check_fixed_perturbation():
    prob = example_hard()
    t0 = time.perf_counter()
    s1, x1, _, _ = solve_with_p(prob, np.array([0.5, -1.8]))
    s2, x2, _, _ = solve_with_p(prob, np.array([0.01, -1.8]))
    elapsed = time.perf_counter() - t0
    ok = (
        abs(s1 - 1.676) <= 1e-3
        and np.all(np.abs(x1 - [0.74, -0.673]) <= 1e-3)
        and abs(s2 - 1.022) <= 1e-3
        and np.all(np.abs(x2 - [0.456, -0.89]) <= 1e-3)
        and elapsed < 0.1
    )
    detail = f"sigma={s1:.6f},{s2:.6f} x1={np.round(x1, 5)} x2={np.round(x2, 5)} time={elapsed:.4f}s"
    return report(1, "fixed perturbations of the planar hard example", ok, detail)


def check_hard_example():
    sol = solve(example_hard(), SolverConfig(alpha=1e-4))
    targets = [np.array([math.sqrt(0.19), -0.9]), np.array([-math.sqrt(0.19), -0.9])]
    dist = min(np.linalg.norm(sol.x - t) for t in targets)
    ok = dist <= 1e-2 and abs(sol.primal_value + 2.62) <= 1e-3 and sol.gap <= 1e-6
    detail = f"case={sol.case.value} dist={dist:.2e} value={sol.primal_value:.8f} gap={sol.gap:.2e}"
    return report(2, "perturbed solve of the planar hard example", ok, detail)


def check_easy_example():
    sol = solve(example_easy())
    ok = (
        sol.case is Case.BOUNDARY_EASY
        and abs(sol.sigma - 2.0) <= 1e-7
        and np.all(np.abs(sol.x - [0.0, -1.0]) <= 1e-6)
        and sol.gap <= 1e-8
    )
    detail = f"case={sol.case.value} sigma={sol.sigma!r} gap={sol.gap:.2e}"
    return report(3, "planar easy example", ok, detail)


def sweep_instance(i):
    """Instance ``i`` of the oracle sweep: cycles general, hard and interior draws."""
    n = 5 + (i * 7) % 46
    kind = i % 3
    if kind == 0:
        return gen_general(GenSpec(n, "general", i)), "general"
    if kind == 1:
        return gen_hard(GenSpec(n, "hard", i))[0], "hard"
    return spd_instance(n, i), "interior"


def check_oracle_sweep(count=200, alpha=1e-4):
    t0 = time.perf_counter()
    value_fail, dist_fail, hard_count, worst_ratio = [], [], 0, 0.0
    cfg = SolverConfig(alpha=alpha)
    for i in range(count):
        prob, kind = sweep_instance(i)
        sol = solve(prob, cfg)
        dec = oracle.eig_full(prob.Q)
        sols = oracle.global_solutions(dec, prob.f, prob.r, prob.Q)
        ref = sols[0].value
        if abs(sol.primal_value - ref) > 1e-6 * (1 + abs(ref)):
            value_fail.append(i)
        if sols[0].family is not None:
            hard_count += 1
            _, _, tail = oracle.existence_condition(dec, prob.f, prob.r)
            eps = accuracy_for_alpha(dec.lambdas[0], dec.lambdas[dec.k], tail, prob.r, alpha)
            d = oracle.nearest_solution_distance(sols, sol.x)
            worst_ratio = max(worst_ratio, d / eps)
            if d > eps:
                dist_fail.append(i)
    elapsed = time.perf_counter() - t0
    ok = not value_fail and not dist_fail and elapsed < 60
    detail = (
        f"value mismatches={len(value_fail)}/{count} hard distance over bound={len(dist_fail)}/{hard_count}"
        f" (worst distance/eps={worst_ratio:.3f}) time={elapsed:.1f}s"
    )
    return report(4, "oracle equivalence sweep", ok, detail)


def check_scale(n=500, per_cell=10):
    lines, ok = [], True
    for case in ("general", "hard"):
        for alpha in (1e-3, 1e-4):
            cfg = SolverConfig(alpha=alpha)
            succ, strays = 0, []
            for seed in range(per_cell):
                spec = GenSpec(n, case, seed)
                prob = gen_hard(spec)[0] if case == "hard" else gen_general(spec)
                t0 = time.perf_counter()
                try:
                    sol = solve(prob, cfg)
                except Exception as exc:  # noqa: BLE001
                    strays.append(f"seed {seed}: {exc}")
                    continue
                elapsed = time.perf_counter() - t0
                good = sol.converged and sol.iterations_bisect <= 60 and elapsed < 10
                if sol.case is not Case.INTERIOR:
                    good = good and abs(sol.psi_final) < 1e-8 and sol.dist_boundary <= 1e-6
                if good:
                    succ += 1
                else:
                    strays.append(
                        f"seed {seed}: psi={sol.psi_final:.1e} iters={sol.iterations_bisect} t={elapsed:.1f}s"
                    )
            ok = ok and succ >= per_cell - 1
            lines.append(f"{case}/a={alpha:g}: {succ}/{per_cell}")
    return report(5, f"n={n} benchmark cells", ok, "; ".join(lines))


def check_invariants():
    failures = []
    prob = random_instance(30, 21)
    A = prob.Q.to_dense()
    w = np.linalg.eigvalsh(A)
    grid = -w[0] + np.logspace(-3, 2, 80)
    psi = np.array([dual.eval_psi(prob, None, s) for s in grid])
    slopes = np.diff(psi) / np.diff(grid)
    if not (np.all(np.diff(psi) < 0) and np.all(np.diff(slopes) > -1e-9 * np.abs(slopes[:-1]))):
        failures.append("psi shape")
    for s in grid[::10]:
        d1, d2 = dual.eval_psi_derivs(prob, None, s)
        h = 1e-5 * (s + w[0])
        fd1 = (dual.eval_psi(prob, None, s + h) - dual.eval_psi(prob, None, s - h)) / (2 * h)
        fd2 = (dual.eval_psi_derivs(prob, None, s + h)[0] - dual.eval_psi_derivs(prob, None, s - h)[0]) / (2 * h)
        if abs(fd1 - d1) > 1e-5 * abs(d1) or abs(fd2 - d2) > 1e-5 * abs(d2):
            failures.append(f"derivatives at {s:.4g}")
            break
    sol = solve(prob)
    if dual.duality_gap(prob, None, sol.sigma, sol.x) > 1e-8 * (1 + abs(sol.primal_value)):
        failures.append("duality gap")
    # Bracket invariant: every positive psi sample lies left of every non-positive one.
    seen, real = [], solver.eval_psi

    def spy(*a, **kw):
        out = real(*a, **kw)
        seen.append((a[2], out[0] if isinstance(out, tuple) else out))
        return out

    solver.eval_psi = spy
    try:
        solve(gen_hard(GenSpec(60, "hard", 1))[0])
    finally:
        solver.eval_psi = real
    pos = [s for s, v in seen if v > 0]
    neg = [s for s, v in seen if v <= 0]
    if pos and neg and max(pos) >= min(neg):
        failures.append("bracket invariant")
    hp = gen_hard(GenSpec(100, "hard", 3))[0]
    a, b = solve(hp), solve(hp)
    if a.x.tobytes() != b.x.tobytes() or a.sigma != b.sigma or a.psi_final != b.psi_final:
        failures.append("determinism")
    worst = 0.0
    for n, seed in ((10, 0), (50, 1), (120, 2), (200, 3)):
        q = random_instance(n, seed).Q
        ref = np.linalg.eigvalsh(q.to_dense())[0]
        err = abs(lanczos_smallest(q).lambda1_est - ref) / (1 + abs(ref))
        worst = max(worst, err)
    if worst > 1e-8:
        failures.append("Lanczos accuracy")
    detail = "all sub-checks hold" if not failures else "failed: " + ", ".join(failures)
    return report(6, "invariant suites", not failures, detail + f" (Lanczos rel err {worst:.1e})")


def check_generators():
    failures = []
    for seed in range(30):
        n = 2 + (seed * 13) % 60
        prob, cert = gen_hard(GenSpec(n, "hard", seed))
        holds, _, _ = oracle.existence_condition(oracle.eig_full(prob.Q), prob.f, prob.r)
        if holds:
            failures.append(f"existence holds (seed {seed})")
        if abs(cert.v1 @ prob.f) > 1e-12 * np.linalg.norm(prob.f):
            failures.append(f"projection (seed {seed})")
    with tempfile.TemporaryDirectory() as tmp:
        for i, prob in enumerate([example_hard(), gen_general(GenSpec(40, "general", 1)), gen_hard(GenSpec(40, "hard", 2))[0]]):
            stem = Path(tmp) / f"b{i}"
            write_instance(prob, stem)
            back = read_instance(stem)
            if (
                back.Q.to_dense().tobytes() != prob.Q.to_dense().tobytes()
                or back.f.tobytes() != prob.f.tobytes()
                or back.r != prob.r
            ):
                failures.append(f"round trip {i}")
    detail = "30 hard draws fail existence, projections exact, round trips bitwise" if not failures else "; ".join(failures)
    return report(7, "generator contracts", not failures, detail)


CHECKS = [
    check_fixed_perturbation,
    check_hard_example,
    check_easy_example,
    check_oracle_sweep,
    check_scale,
    check_invariants,
    check_generators,
]


@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i + 1}" for i in range(len(CHECKS))])
def test_criterion(check, capsys):
    with capsys.disabled():
        print()
        ok = check()
    assert ok


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    sys.exit(0 if all(results) else 1)
