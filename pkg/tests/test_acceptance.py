"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import itertools
import math
import subprocess
import sys
import time

import numpy as np
from scipy.optimize import brentq

from moran_dim.estimators import empirical_assouad, greedy_packing, packing_exponent_test, psi
from moran_dim.examples import build_arbitrary_values_example, build_unbounded_example, tangent_witness
from moran_dim.geometry import bnc_verdict, check_osc
from moran_dim.ifs_core import IFSSpec, LevelSystem, validate_spec
from moran_dim.pressure import assouad_symbolic, pressure_derivative_at_zero, theta

from conftest import CANTOR_DIM, cantor_spec, random_osc_autonomous, random_periodic


def report(tag: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
    assert ok, detail


def similarity_dimension(r: np.ndarray) -> float:
    return brentq(lambda s: float(np.sum(r ** s)) - 1, 0.0, 10.0, xtol=1e-15, rtol=1e-15)


def test_ac01_cantor_theta_closed_form():
    spec = cantor_spec()
    t0 = time.perf_counter()
    worst = max(abs(theta(spec, n, m).theta - CANTOR_DIM) for n in range(1, 21) for m in range(1, 21))
    dt = time.perf_counter() - t0
    report("AC1", worst <= 1e-10 and dt < 1.0,
           f"max |theta(n,m) - log2/log3| = {worst:.2e} over n,m <= 20 (tol 1e-10), {dt:.2f} s (limit 1 s)")


def test_ac02_autonomous_osc_consistency():
    t0 = time.perf_counter()
    worst_sym, misses = 0.0, []
    for seed in range(10):
        spec, r = random_osc_autonomous(seed)
        assert check_osc(spec).status == "pass"
        s = similarity_dimension(r)
        worst_sym = max(worst_sym, abs(assouad_symbolic(spec, 5).estimate - s))
        est = empirical_assouad(spec, [1e-2, 1e-4, 1e-6], [1.0, 0.1], cap=10**6)
        if not est.contains(s, 0.05):
            misses.append((seed, s, est.lower, est.upper))
    dt = time.perf_counter() - t0
    report("AC2", worst_sym <= 1e-8 and not misses and dt < 120,
           f"symbolic error {worst_sym:.2e} (tol 1e-8), intervals missing s by > 0.05: {misses}, "
           f"{dt:.1f} s (limit 120 s)")


def _submax_sweep():
    """``theta`` tables and violations over ``n + m + k <= 25`` for ten periodic specs."""
    tables, violations = [], []
    for seed in range(10):
        spec = random_periodic(seed)
        th = {(n, m): theta(spec, n, m).theta for n in range(1, 25) for m in range(1, 26 - n)}
        for n, m, k in itertools.product(range(1, 24), repeat=3):
            if n + m + k <= 25 and th[(n, m + k)] > max(th[(n, m)], th[(n + m, k)]) + 1e-9:
                violations.append((seed, n, m, k))
        tables.append((spec, th))
    return tables, violations


def test_ac03_submaximality_sweep():
    tables, violations = _submax_sweep()
    triples = sum(1 for n, m, k in itertools.product(range(1, 24), repeat=3) if n + m + k <= 25)
    report("AC3", not violations,
           f"{len(violations)} violations of theta(n,m+k) <= max(theta(n,m), theta(n+m,k)) + 1e-9 "
           f"over {10 * triples} triples")


def test_ac04_pressure_derivative_sign():
    tables, _ = _submax_sweep()
    worst = max(pressure_derivative_at_zero(spec, n, m) for spec, th in tables for (n, m) in th)
    entries = sum(len(th) for _, th in tables)
    homog = []
    for r, k in [(1 / 3, 2), (0.25, 4), (0.1, 3), (0.45, 2)]:
        spec = IFSSpec.periodic([LevelSystem.homogeneous_line(r, [i / k for i in range(k)])])
        homog.append(abs(pressure_derivative_at_zero(spec, 2, 3) - math.log(r)))
    report("AC4", worst < 0 and max(homog) <= 1e-10,
           f"largest derivative at the zero {worst:.3g} over {entries} entries (< 0); "
           f"homogeneous |phi' - log r| <= {max(homog):.1e} (tol 1e-10)")


def test_ac05_packing_dichotomy():
    spec = cantor_spec()
    t0 = time.perf_counter()
    packs = [greedy_packing(spec, [0.5], 0.5, depth) for depth in range(1, 9)]
    assert all(p.check() for p in packs)
    above = [packing_exponent_test([p], CANTOR_DIM + 0.01).max_ratio for p in packs]
    below = [packing_exponent_test([p], CANTOR_DIM - 0.05).max_ratio for p in packs]
    growth = below[-1] / below[0]
    dt = time.perf_counter() - t0
    report("AC5", max(above) < 10 and growth >= 2 and dt < 30,
           f"alpha = s + 0.01: max ratio {max(above):.3f} (< 10); alpha = s - 0.05: depth 8 / depth 1 = "
           f"{growth:.3f} (>= 2); {dt:.1f} s (limit 30 s)")


def test_ac06_psi_oracle_and_submultiplicativity():
    spec = cantor_spec()
    exact = all(psi(spec, 1.0, 3.0 ** -k).psi == (2 ** k, 2 ** k) for k in range(1, 7))
    Psi_exact = all(psi(spec, 1.0, 3.0 ** -k).Psi[0] == psi(spec, 1.0, 3.0 ** -k).Psi[1]
                    and math.isclose(psi(spec, 1.0, 3.0 ** -k).Psi[0], CANTOR_DIM, rel_tol=1e-12)
                    for k in range(1, 7))
    rs = [1.0, 0.5, 1 / 3, 0.2, 1 / 9]
    ds = [0.5, 1 / 3, 0.2, 1 / 9, 0.05]
    cache = {}

    def up(r, d):
        if (r, d) not in cache:
            cache[(r, d)] = psi(spec, r, d).psi[1]
        return cache[(r, d)]

    bad = [(r, d1, d2) for r, d1, d2 in itertools.product(rs, ds, ds)
           if up(r, d1 * d2) > up(r, d1) * up(r * d1, d2)]
    report("AC6", exact and Psi_exact and not bad,
           f"psi(1, 3^-k) = 2^k for k = 1..6: {exact}; Psi = log2/log3: {Psi_exact}; "
           f"submultiplicativity violations on the 5x5x5 grid: {bad}")


def test_ac07_bnc_checkers():
    cantor = bnc_verdict(cantor_spec())
    arb = bnc_verdict(build_arbitrary_values_example(0.5, 1.0, k="linear"), cap=10**5)
    homog = validate_spec(IFSSpec.periodic([LevelSystem.homogeneous_line(0.2, [0.0, 0.25, 0.5, 0.75])]))
    hv = bnc_verdict(homog)
    ok = (cantor.status == "verified" and "c" in cantor.clauses
          and arb.status == "falsified" and arb.branching_bounded is False
          and hv.status == "verified" and "b" in hv.clauses)
    report("AC7", ok,
           f"Cantor {cantor.status} clauses {sorted(cantor.clauses)}; arbitrary-values example "
           f"{arb.status} (branching bounded: {arb.branching_bounded}); homogeneous N=4 "
           f"{hv.status} clauses {sorted(hv.clauses)}")


def test_ac08_unbounded_example():
    eps = 0.25
    spec = validate_spec(build_unbounded_example(eps, depth_budget=1024))
    g = spec.generator
    sch = g.schedule
    osc = check_osc(spec).status
    n_levels = min(sch.levels_total, g.depth_budget)
    worst_theta = max(theta(spec, n, 1).theta for n in range(1, n_levels + 1))
    # left-branch products inside every tuple Phi^ell of the constructed sequence
    worst_left, n = 0.0, 1
    for ell in sch.ells:
        if n + ell - 2 > n_levels:
            break
        prod = 1.0
        for j in range(1, ell):
            prod *= float(spec.level(n).ratios[0])
            worst_left = max(worst_left, abs(prod - (1 - j / ell)))
            n += 1
    witnesses = []
    for k in (sch.completed_stages - 1, sch.completed_stages):
        before = g.levels_before_tuple(sch.m[k - 1] - 1)
        tw = tangent_witness(spec, np.arange(1, k + 1) / (k + 1), [0] * before, depth=k)
        witnesses.append((k + 1, tw.p_H, tw.sampling_error))
    ok = (osc == "pass" and worst_theta <= eps + 1e-9 and worst_left <= 1e-12
          and all(p <= e for _, p, e in witnesses))
    report("AC8", ok,
           f"osc {osc}; max theta(n,1) = {worst_theta:.12f} over {n_levels} levels (<= {eps} + 1e-9); "
           f"left-branch error {worst_left:.1e} (tol 1e-12); tangent (ell, p_H, bound) {witnesses}")


def test_ac09_arbitrary_values_example():
    spec = validate_spec(build_arbitrary_values_example(0.5, 1.0, k="linear"))
    g = spec.generator
    ns = list(range(1, 300)) + [1023, 1024, 2 ** 16, 2 ** 20 - 1, 2 ** 20]
    homog = all(np.all(spec.level(n).ratios == spec.level(n).ratios[0]) for n in ns)
    counts = all(len(spec.level(n)) == 2 ** g.m_n(n) <= g.k_n(n) for n in ns)
    worst = max(abs(theta(spec, n, m).theta - 0.5) for n in range(1, 25) for m in range(1, 26 - n))
    lowers = {}
    for m in (14, 20):
        anchor = g.first_level_with(m) - 1
        est = empirical_assouad(spec, [2.0 ** -(m - 2)], [1.0], anchors=(anchor,), cap=4 * 10**6)
        lowers[m] = est.lower
    ok = homog and counts and worst <= 1e-9 and lowers[20] > 0.9 and lowers[20] > lowers[14]
    report("AC9", ok,
           f"homogeneous: {homog}; #J = 2^m_n <= k_n: {counts}; max |theta - s| = {worst:.1e} "
           f"for n+m <= 25 (tol 1e-9); empirical lower end at m_n = 14: {lowers[14]:.4f}, "
           f"m_n = 20: {lowers[20]:.4f} (> 0.9)")


def test_ac10_cli_determinism(tmp_path, cantor_file):
    runs = {
        "theta": ["--spec", str(cantor_file), "--m-max", "4", "--n-max", "4"],
        "dima": ["--spec", str(cantor_file), "--m-max", "4"],
        "check": ["--spec", str(cantor_file)],
        "nbhd": ["--spec", str(cantor_file), "--levels", "4", "--refine", "2"],
        "estimate": ["--spec", str(cantor_file), "--delta-min", "1e-3", "--r-steps", "2"],
        "pack": ["--spec", str(cantor_file), "--alpha", "0.6,0.7", "--depths", "1:4"],
        "example": ["--name", "arbitrary", "--param", "s=0.5", "--param", "t=1.0"],
        "render": ["--spec", str(cantor_file), "--depth", "3"],
    }
    differing = []
    for name, args in runs.items():
        outs = []
        for i in range(3):
            out = tmp_path / f"{name}-{i}.csv"
            proc = subprocess.run([sys.executable, "-m", "moran_dim.cli", name, *args, "--seed", "7",
                                   "--out", str(out)], capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outs.append(out.read_bytes())
        if len(set(outs)) != 1:
            differing.append(name)
    report("AC10", not differing,
           f"{len(runs)} subcommands x 3 runs on the Cantor spec; differing outputs: {differing}")
