"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line.  Run the file
directly (``python tests/test_acceptance.py``) for the same lines without
pytest.
"""

from __future__ import annotations

import math
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from oracles import all_orange_example, green_orange_example, grid_max_profit, white_red_example  # noqa: E402
from regime_checks import boundary_jumps, grid_agreement  # noqa: E402
from cournot_climate.dynamics import BeliefSchedule, LimitStatus, check_limit_green, check_limit_no_green  # noqa: E402
from cournot_climate.equilibrium import brute_force_equilibria, damped_iteration, enumerate_equilibria, solve  # noqa: E402
from cournot_climate.errors import RegimeInstability  # noqa: E402
from cournot_climate.model import Color, EconomyParams, FirmBelief, best_response, expected_profit, Environment  # noqa: E402
from cournot_climate.sampling import log_uniform, random_instance  # noqa: E402
from cournot_climate.statics import Effect, statics_report  # noqa: E402
from cournot_climate.two_firm import GridSpec, TwoFirmRegime  # noqa: E402
from cournot_climate.utility import CRRA, Log, Quadratic, interior_carbon_profile, solve_symmetric  # noqa: E402

TIME_LIMIT = 60.0


def _report(number: int, ok: bool, detail: str, elapsed: float):
    status = "PASS" if ok else "FAIL"
    return f"ACCEPTANCE {number} {status} ({elapsed:.1f}s): {detail}"


# --- 1. two-firm closed forms ----------------------------------------------


def criterion_1():
    cases = [
        # z = 6 > d = 5
        (EconomyParams(A=12, b=1, c=1, d=5), 9.0),
        # z = 3 <= d = 12; white-red cells need a_1 up to roughly 2 z d / (d - z) = 8
        (EconomyParams(A=16, b=1, c=1, d=12), 18.0),
    ]
    worst_gap, worst_jump, boundaries = 0.0, 0.0, 0
    seen = set()
    for params, hi in cases:
        gap, cells = grid_agreement(params, GridSpec(0.0, hi, 0.0, hi, 200))
        jump, count = boundary_jumps(params, cells, 200)
        worst_gap, worst_jump, boundaries = max(worst_gap, gap), max(worst_jump, jump), boundaries + count
        seen |= {c.regime for c in cells}
    expected = {TwoFirmRegime.ORANGE_ORANGE, TwoFirmRegime.GREEN_ORANGE, TwoFirmRegime.GREEN_GREEN,
                TwoFirmRegime.ORANGE_RED, TwoFirmRegime.GREEN_RED, TwoFirmRegime.RED_RED, TwoFirmRegime.WHITE_RED}
    ok = worst_gap < 1e-9 and worst_jump < 1e-9 and expected <= seen
    detail = (f"max |solve - closed form| = {worst_gap:.2e}, max boundary jump = {worst_jump:.2e} "
              f"over {boundaries} boundaries, {len(seen)} regime labels")
    return ok, detail


# --- 2. example regimes ----------------------------------------------------


def criterion_2():
    rng = np.random.default_rng(2)
    params = EconomyParams(A=10, b=1, c=1, d=1)
    z = params.z
    worst = 0.0
    counts = Counter()
    for n in (3, 5):
        while counts[f"orange{n}"] < 100:
            a = np.sort(rng.uniform(0.5, 3.0, n))
            if not (a[0] > np.mean(np.r_[0.0, a[1:]]) and a[-1] < np.mean(np.r_[z, a[:-1]])):
                continue
            eq = solve(params, [FirmBelief.from_a(x, params) for x in a])
            ref = all_orange_example(a, z)
            worst = max(worst, abs(eq.Q - n * z / (n + 1)), abs(eq.K - a.sum() / (n + 1)), abs(eq.Q - ref["Q"]))
            counts[f"orange{n}"] += 1
    green_mismatch = 0
    while counts["green"] < 300:
        n = int(rng.integers(2, 9))
        K_ex = float(rng.uniform(0, 1))
        a = np.sort(rng.uniform(0.1, 3.0, n))
        ref = green_orange_example(a, z, K_ex)
        if not ref["condition"]:
            continue
        p = params.with_K_ex(K_ex)
        eq = solve(p, [FirmBelief.from_a(x, p) for x in a])
        green_mismatch += sum(c is Color.GREEN for c in eq.colors) != ref["n0"]
        worst = max(worst, abs(eq.K - ref["K"]), abs(eq.Q - ref["Q"]))
        counts["green"] += 1
    while counts["white"] < 300:
        n = int(rng.integers(1, 9))
        d = float(rng.uniform(9.0, 14.0))
        K_ex = float(rng.uniform(0, 2))
        alpha_sq = rng.uniform(0.01, 5.0, n)
        p = EconomyParams(A=10, b=1, c=1, d=d, K_ex=K_ex)
        beliefs = [FirmBelief(x) for x in alpha_sq]
        if min(bel.a(p) for bel in beliefs) < p.z + K_ex:
            continue
        ref = white_red_example(10.0, 1.0, 1.0, alpha_sq, K_ex)
        eq = solve(p, beliefs)
        green_mismatch += sum(c is Color.WHITE for c in eq.colors) != ref["n0"]
        worst = max(worst, abs(eq.Q - ref["Q"]), abs(eq.K - ref["K"]), float(np.abs(eq.q - ref["q"]).max()))
        counts["white"] += 1
    ok = worst < 1e-12 and green_mismatch == 0
    detail = (f"{sum(counts.values())} instances ({dict(counts)}), max error {worst:.2e}, "
              f"{green_mismatch} bucket-count mismatches")
    return ok, detail


# --- 3. uniqueness ---------------------------------------------------------


def criterion_3():
    rng = np.random.default_rng(3)
    multiple, worst = 0, 0.0
    for _ in range(1000):
        params, beliefs = random_instance(rng, n_max=10)
        cands = enumerate_equilibria(params, beliefs)
        multiple += len(cands) != 1
        eq = solve(params, beliefs)
        n = len(beliefs)
        q0 = rng.uniform(0.0, max((params.A - params.c) / 2, 0.0), (20, n))
        k0 = q0 * rng.uniform(0.0, 1.0, (20, n))
        q, k, _, _ = damped_iteration(params, beliefs, q0, k0)
        worst = max(worst, float(np.abs(q - eq.q).max()), float(np.abs(k - eq.k).max()))
    ok = multiple == 0 and worst < 1e-7
    return ok, f"1000 instances, {multiple} with other than one partition, max iteration gap {worst:.2e}"


# --- 4. best-response optimality ---------------------------------------------


def criterion_4():
    rng = np.random.default_rng(4)
    N = 10_000
    A = rng.uniform(1.0, 20.0, N)
    c = A * rng.uniform(0.05, 1.2, N)
    d = A * log_uniform(rng, 0.02, 1.0, N)
    b = log_uniform(rng, 0.1, 10.0, N)
    alpha_sq = np.where(rng.random(N) < 0.05, 0.0, log_uniform(rng, 1e-3, 50.0, N))
    Qm = A * rng.uniform(0.0, 1.0, N)
    Km = A * rng.uniform(0.0, 2.0, N)
    analytic = np.empty(N)
    bound_breaks = 0
    for i in range(N):
        params = EconomyParams(A=A[i], b=b[i], c=c[i], d=d[i])
        bel = FirmBelief(alpha_sq[i])
        env = Environment(Qm[i], Km[i])
        s = best_response(params, bel, env)
        analytic[i] = expected_profit(params, bel, env, s)
        bound_breaks += s.q > max((A[i] - c[i]) / 2, 0.0) + 1e-12
    grid = np.concatenate([grid_max_profit(A[j:j + 16], c[j:j + 16], d[j:j + 16], (b * alpha_sq)[j:j + 16],
                                           Qm[j:j + 16], Km[j:j + 16], resolution=400) for j in range(0, N, 16)])
    slack = grid - analytic
    losses = int((slack > 1e-9).sum())
    ok = losses == 0 and bound_breaks == 0
    return ok, f"{N} environments, grid beats analytic in {losses} (max slack {slack.max():.2e}), {bound_breaks} bound breaks"


# --- 5. comparative statics ------------------------------------------------


def criterion_5():
    rng = np.random.default_rng(5)
    stable = skipped = 0
    failed_partials = failed_signs = partial_rows = sign_rows = 0
    worst = 0.0
    coverage = Counter()
    while stable < 500:
        # a quarter of the draws admit skeptics so that red firms with zero belief occur
        params, beliefs = random_instance(rng, n_max=6, allow_skeptics=stable % 4 == 0, allow_no_market=False)
        eq = solve(params, beliefs)
        if Color.WHITE in eq.colors:
            continue
        try:
            report = statics_report(params, beliefs, eq, step=1e-5, min_step=1e-5)
        except RegimeInstability:
            skipped += 1
            continue
        stable += 1
        partial_rows += len(report.partials)
        sign_rows += len(report.signs)
        failed_partials += len(report.failed_partials(rtol=1e-4))
        failed_signs += len(report.failed_signs())
        worst = max(worst, report.max_rel_error)
        stats = eq.stats
        if stats.n_int and stats.n1 == 0:
            coverage["no red firm"] += 1
        if stats.n_int and stats.n1 and stats.B1 == stats.n1:
            coverage["only skeptic reds"] += 1
        for row in report.signs:
            if row.effect is Effect.AMBIGUOUS:
                coverage["ambiguous +" if row.resolved > 0 else "ambiguous -"] += 1
    ok = failed_partials == 0 and failed_signs == 0 and all(
        coverage[k] for k in ("no red firm", "ambiguous +", "ambiguous -"))
    detail = (f"{stable} stable instances ({skipped} unstable skipped), {partial_rows} partials with max rel error "
              f"{worst:.2e}, {failed_partials} failed; {sign_rows} signs, {failed_signs} failed; coverage {dict(coverage)}")
    return ok, detail


# --- 6. dynamics -----------------------------------------------------------


def criterion_6():
    rng = np.random.default_rng(6)
    problems = []
    runs = 0
    green = EconomyParams(A=10, b=1, c=1, d=1)
    for trial in range(10):
        n = int(rng.integers(1, 5))
        target = log_uniform(rng, 0.15, 2.0, n)
        alpha_true = math.sqrt(float(target.min()))
        if trial % 2:
            schedule = BeliefSchedule.constant(target)
        else:
            # a increases over time: alpha_sq falls towards its target
            schedule = BeliefSchedule.relaxing(target * rng.uniform(1.0, 4.0, n), target, rate=float(rng.uniform(0.3, 0.95)))
        v = check_limit_green(green, schedule, tol=1e-6, max_rounds=10**5, alpha_true=alpha_true)
        runs += 1
        overshoot = bool((v.trace.K >= v.limit).any())
        if not (v.status is LimitStatus.CONVERGED and v.gap < 1e-6 and not overshoot and not v.violations
                and abs(v.temperature - v.temperature_limit) < 1e-6):
            problems.append(f"green trial {trial}: {v.status.value}, gap {v.gap:.2e}, T gap "
                            f"{abs(v.temperature - v.temperature_limit):.2e}, {len(v.violations)} violations")
    no_green = EconomyParams(A=10, b=1, c=1, d=12)
    for trial in range(10):
        n = int(rng.integers(1, 5))
        target = log_uniform(rng, 0.2, 3.0, n)
        if trial % 2:
            schedule = BeliefSchedule.constant(target)
        else:
            schedule = BeliefSchedule.relaxing(target * rng.uniform(1.0, 4.0, n), target, rate=float(rng.uniform(0.3, 0.95)))
        v = check_limit_no_green(no_green, schedule, tol=1e-6, max_rounds=10**5)
        runs += 1
        if not (v.status is LimitStatus.CONVERGED and v.gap < 1e-6 and not v.violations):
            problems.append(f"no-green trial {trial}: {v.status.value}, gap {v.gap:.2e}, {len(v.violations)} violations")
    ok = not problems
    return ok, f"{runs} schedules, " + ("all converged with every per-round bound" if ok else "; ".join(problems))


# --- 7. general utility ------------------------------------------------------


def criterion_7():
    worst = 0.0
    none_fail = 0
    for cost in (0.5, 2.0, 7.0):
        params = EconomyParams(A=10, b=1, c=cost / 2, d=cost / 2)
        for n in range(2, 9):
            worst = max(worst, abs(solve_symmetric(Log(), params, n) - (n - 1) / (cost * n**2)))
            for frac in (0.1, 0.35, 0.6, 0.85):
                gamma = frac * n
                exact = ((n - gamma) / (cost * n ** (gamma + 1))) ** (1 / gamma)
                worst = max(worst, abs(solve_symmetric(CRRA(gamma), params, n) - exact))
            for gamma in (float(n), n + 0.5, 2.0 * n):
                none_fail += solve_symmetric(CRRA(gamma), params, n) is not None
    params = EconomyParams(A=10, b=1, c=1, d=1)
    rng = np.random.default_rng(7)
    quad_checked = 0
    while quad_checked < 50:
        n = int(rng.integers(1, 7))
        a = rng.uniform(1.0, 3.0, n)
        beliefs = [FirmBelief.from_a(x, params) for x in a]
        eq = solve(params, beliefs)
        if set(eq.colors) != {Color.ORANGE}:
            continue
        spec = Quadratic(params.A)
        q0 = solve_symmetric(spec, params, n)
        prof = interior_carbon_profile(spec, params, beliefs, q0)
        worst = max(worst, float(np.abs(eq.q - q0).max()), float(np.abs(np.array(prof.k) - eq.k).max()),
                    abs(prof.K - eq.K))
        quad_checked += 1
    ok = worst < 1e-10 and none_fail == 0
    return ok, (f"log, CRRA and {quad_checked} quadratic/all-orange checks, max error {worst:.2e}; "
                f"{none_fail} gamma >= n cases returned a solution")


# --- 8. brute-force partitions -----------------------------------------------


def criterion_8():
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(200):
        params, beliefs = random_instance(rng, n_max=6)
        eq = solve(params, beliefs)
        found = brute_force_equilibria(params, beliefs)
        profiles = {(tuple(np.round(c.q, 9)), tuple(np.round(c.k, 9))) for c in found}
        same = found and all(np.abs(c.q - eq.q).max() < 1e-9 and np.abs(c.k - eq.k).max() < 1e-9 for c in found)
        mismatches += not (same and len(profiles) == 1)
    return mismatches == 0, f"200 instances, {mismatches} where exhaustive search disagreed"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("number", range(1, 9))
def test_acceptance(number):
    start = time.perf_counter()
    ok, detail = CRITERIA[number - 1]()
    elapsed = time.perf_counter() - start
    line = _report(number, ok and elapsed < TIME_LIMIT, detail, elapsed)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
    assert elapsed < TIME_LIMIT, line


if __name__ == "__main__":
    failures = 0
    for i, fn in enumerate(CRITERIA, start=1):
        t0 = time.perf_counter()
        ok, detail = fn()
        elapsed = time.perf_counter() - t0
        print(_report(i, ok and elapsed < TIME_LIMIT, detail, elapsed), flush=True)
        failures += not (ok and elapsed < TIME_LIMIT)
    sys.exit(1 if failures else 0)
