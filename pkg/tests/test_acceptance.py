"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting. The synthetic-case fixtures solve a 4x4 ramp-limit grid plus the
baseline once per module, which takes several minutes on one core.
"""

import dataclasses
import time
from pathlib import Path

import numpy as np
import pytest

from mgflex import assemble, build_envelope, generate_scenarios, make_time_grid
from mgflex.envelope import inter_hour_envelope, intra_hour_envelope
from mgflex.schedule import extract_schedule
from mgflex.solver import SolveOptions, solve_lp, solve_milp
from mgflex.solver.mps import parse_mps, to_mps
from mgflex.sweep import SweepResult, compute_incentives, read_table_csv, solve_cell
from mgflex.synthetic import synthetic_instance
from mgflex.validator import brute_force_optimum, check_schedule

from cases import highs_mps_optimum, random_tiny_instance, smoke_instance
from conftest import ACCEPTANCE_LINES

TABLE = Path(__file__).parent / "data" / "ramp_limit_costs.csv"
TINY_SEEDS = range(1000, 1036)
GRID_D1 = [0.0, 0.5, 1.0, 2.0]
GRID_D2 = [0.5, 1.0, 2.0, 5.0]
CELL_LIMIT = 300.0


def record(cid, ok, detail):
    line = f"[{cid}] {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _model(inst):
    scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
    env = build_envelope(inst)
    model, vi = assemble(inst, env, scen)
    return scen, env, model, vi


@pytest.fixture(scope="module")
def tiny_suite():
    out = []
    start = time.perf_counter()
    for seed in TINY_SEEDS:
        inst = random_tiny_instance(np.random.default_rng(seed), max_binaries=16)
        scen, env, model, vi = _model(inst)
        res = solve_milp(model)
        brute = brute_force_optimum(inst, scen, env, max_binaries=16)
        out.append(dict(seed=seed, inst=inst, scen=scen, env=env, model=model, vi=vi, res=res, brute=brute))
    return out, time.perf_counter() - start


@pytest.fixture(scope="module")
def synthetic_grid():
    inst = synthetic_instance()
    scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
    opts = SolveOptions(time_limit=CELL_LIMIT)
    cells = {(d2, d1): solve_cell(inst, d1, d2, opts, scen, keep_schedule=True) for d2 in GRID_D2 for d1 in GRID_D1}
    base = solve_cell(inst, None, None, opts, scen, keep_schedule=True)
    return inst, scen, SweepResult(GRID_D1, GRID_D2, cells, base, opts.rel_gap)


def _solved_schedules(grid):
    inst, scen, sweep = grid
    for (d2, d1), cell in list(sweep.cells.items()) + [((None, None), sweep.baseline)]:
        if cell.schedule is not None:
            yield inst.with_flex(d1, d2), scen, cell


def test_c01_milp_matches_brute_force(tiny_suite):
    suite, elapsed = tiny_suite
    worst, bad, feasible = 0.0, [], 0
    for case in suite:
        res, brute = case["res"], case["brute"]
        assert case["model"].binary.sum() <= 20 and case["scen"].S <= 5 and case["inst"].grid.T <= 3
        if brute.best is None:
            if res.x is not None:
                bad.append(case["seed"])
            continue
        feasible += 1
        err = abs(res.objective - brute.objective) if res.x is not None else np.inf
        worst = max(worst, err / max(1.0, abs(brute.objective)))
        if not err <= max(1e-6, 1e-4 * abs(brute.objective)):
            bad.append(case["seed"])
    ok = not bad and feasible >= 25 and elapsed <= 60
    record("C1", ok, f"{len(suite)} instances ({feasible} feasible), worst rel diff {worst:.2e}, "
                     f"{elapsed:.1f}s total, mismatches {bad}")
    assert ok


def test_c02_every_synthetic_incumbent_validates():
    inst = synthetic_instance()
    assert inst.grid.T == 24 and inst.grid.K == 6 and inst.scenario_stride == 12
    case = inst.with_flex(0.5, 2.0)
    scen, env, model, vi = _model(case)
    assert scen.S == 13
    res = solve_milp(model, SolveOptions(time_limit=600))
    worst, failed = 0.0, []
    for i, x in enumerate(res.incumbents):
        shim = dataclasses.replace(res, x=x, objective=model.objective(x))
        report = check_schedule(case, scen, env, extract_schedule(shim, vi, case, scen), tol=1e-6)
        worst = max(worst, report.max_residual)
        if not report.passed:
            failed.append((i, sorted(report.families())))
    ok = bool(res.incumbents) and not failed and res.wall_time <= 600
    record("C2", ok, f"{len(res.incumbents)} incumbents, max residual {worst:.1e}, status {res.status}, "
                     f"{res.wall_time:.1f}s, failures {failed}")
    assert ok


def test_c03_envelope_identity(synthetic_grid):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        T, K = int(rng.integers(1, 25)), int(rng.integers(1, 7))
        agg = rng.uniform(-10, 10, (T, K))
        d1, d2 = float(rng.uniform(0, 3)), float(rng.uniform(0, 5))
        lo1, up1 = intra_hour_envelope(agg, d1)
        lo2, up2 = inter_hour_envelope(agg, d2)
        pm = np.empty(T * K)
        pm[0] = rng.uniform(-5, 5)
        for p in range(1, T * K):
            t, k = divmod(p, K)
            lo, up = (lo1[t, k], up1[t, k]) if k > 0 else (lo2[t], up2[t])
            pm[p] = pm[p - 1] + rng.uniform(lo, up)
        pu = pm.reshape(T, K) + agg
        worst = max(worst, np.max(np.abs(np.diff(pu, axis=1)), initial=0) - d1,
                    np.max(np.abs(pu[1:, 0] - pu[:-1, -1]), initial=0) - d2)
    random_worst = worst
    # solved schedules, scenario pairs where both ends are connected
    for case, scen, cell in _solved_schedules(synthetic_grid):
        env = build_envelope(case)
        if env is None:
            continue
        pu = cell.schedule.PM + env.agg[:, :, None]
        w = scen.w.astype(bool)
        if case.flex.delta1 is not None:
            both = w[:, 1:, :] & w[:, :-1, :]
            step = np.abs(np.diff(pu, axis=1))[both]
            worst = max(worst, np.max(step, initial=0) - case.flex.delta1)
        if case.flex.delta2 is not None:
            both = w[1:, 0, :] & w[:-1, -1, :]
            step = np.abs(pu[1:, 0, :] - pu[:-1, -1, :])[both]
            worst = max(worst, np.max(step, initial=0) - case.flex.delta2)
    ok = worst <= 1e-9
    record("C3", ok, f"1000 random series (worst excess {random_worst:.1e}) and "
                     f"{sum(1 for _ in _solved_schedules(synthetic_grid))} solved schedules, worst excess {worst:.1e}")
    assert ok


def test_c04_zero_intra_limit_flattens_utility_power(synthetic_grid):
    worst, n = 0.0, 0
    for case, scen, cell in _solved_schedules(synthetic_grid):
        if case.flex.delta1 != 0.0:
            continue
        n += 1
        pu = cell.schedule.PM + build_envelope(case).agg[:, :, None]
        w = scen.w.astype(bool)
        base = np.ptp(pu[:, :, 0], axis=1).max()
        both = w[:, 1:, :] & w[:, :-1, :]
        worst = max(worst, base, np.max(np.abs(np.diff(pu, axis=1))[both], initial=0))
    ok = n > 0 and worst <= 1e-6
    record("C4", ok, f"{n} solves with delta1=0, max intra-hour spread of utility power {worst:.1e}")
    assert ok


def test_c05_sweep_monotone(synthetic_grid):
    _, _, sweep = synthetic_grid
    g = sweep.objective_grid()
    slack = 2 * sweep.rel_gap * np.nanmax(np.abs(g))
    along_d2 = np.diff(g, axis=0).max()
    along_d1 = np.diff(g, axis=1).max()
    zero_col_strict = bool(np.all(g[:, 0] > np.max(g[:, 1:], axis=1)))
    ok = (not np.isnan(g).any() and along_d2 <= slack and along_d1 <= slack and zero_col_strict
          and sweep.baseline.ok)
    rows = "; ".join(f"d2={d2}: " + ",".join(f"{v:.1f}" for v in row) for d2, row in zip(sweep.delta2, g))
    record("C5", ok, f"max increase along delta2 {along_d2:.3f}, along delta1 {along_d1:.3f} "
                     f"(slack {slack:.3f}), delta1=0 strictly largest: {zero_col_strict}; "
                     f"baseline {sweep.baseline.objective:.1f}; {rows}")
    assert ok


def test_c06_incentives_from_table():
    inc = compute_incentives(read_table_csv(TABLE), baseline=11748.3)
    want = {(0.5, 0.0): 24557.3, (5.0, 0.0): 697.3, (0.5, 2.0): 77.0, (5.0, 2.0): 21.8}
    got = {k: inc[k].value for k in want}
    ok = all(abs(got[k] - v) <= 0.05 for k, v in want.items())
    record("C6", ok, ", ".join(f"(d1={k[1]}, d2={k[0]}) {got[k]:.2f}" for k in want) + " with b=11748.3")
    assert ok


def test_c07_islanding(synthetic_grid):
    count = generate_scenarios(make_time_grid(24, 6), 4, 0.9, 1).S
    worst_pm, worst_bal, min_ls, failed = 0.0, 0.0, np.inf, []
    for case, scen, cell in _solved_schedules(synthetic_grid):
        sched = cell.schedule
        islanded = ~scen.w.astype(bool)
        worst_pm = max(worst_pm, np.max(np.abs(sched.PM[islanded]), initial=0))
        min_ls = min(min_ls, sched.LS.min())
        report = check_schedule(case, scen, build_envelope(case), sched)
        worst_bal = max(worst_bal, max((b.residual for b in report.breaches if b.family == "balance"), default=0))
        if "balance" in report.families():
            failed.append((case.flex.delta1, case.flex.delta2))
    ok = count == 145 and worst_pm <= 1e-9 and min_ls >= -1e-9 and not failed
    record("C7", ok, f"(24,6,k=4) gives {count} scenarios; islanded |PM| max {worst_pm:.1e}, "
                     f"min LS {min_ls:.1e}, balance failures {failed}")
    assert ok


def test_c08_storage(synthetic_grid, tiny_suite):
    worst_soc, worst_bound, both_on, overlap = 0.0, 0.0, 0, 0
    cases = [(c, s, cell.schedule) for c, s, cell in _solved_schedules(synthetic_grid)]
    for t in tiny_suite[0]:
        if t["res"].x is not None:
            cases.append((t["inst"], t["scen"], extract_schedule(t["res"], t["vi"], t["inst"], t["scen"])))
    int_tol = 1e-6
    for inst, scen, sched in cases:
        tau = 1.0 / inst.grid.K
        for b in inst.storages:
            C, ch, dch = sched.C[b.id], sched.Pch[b.id], sched.Pdch[b.id]
            T, K, S = C.shape
            prev = np.full(S, b.C0)
            for t in range(T):
                for k in range(K):
                    level = prev + ch[t, k] * tau - dch[t, k] * tau / b.eta
                    worst_soc = max(worst_soc, np.abs(C[t, k] - level).max())
                    prev = C[t, k]
            worst_bound = max(worst_bound, (b.Cmin - C).max(), (C - b.Cmax).max())
            both_on += int(np.sum(sched.u[b.id] * sched.v[b.id] > 0.5))
            overlap += int(np.sum((dch > int_tol) & (ch > int_tol)))
    ok = worst_soc <= 1e-9 and worst_bound <= 1e-9 and both_on == 0 and overlap == 0
    record("C8", ok, f"{len(cases)} schedules: SoC residual {worst_soc:.1e}, bound excess {worst_bound:.1e}, "
                     f"u*v=1 hours {both_on}, simultaneous charge/discharge {overlap}")
    assert ok


def test_c09_lp_below_milp(synthetic_grid, tiny_suite):
    margins, bad = [], []
    for t in tiny_suite[0]:
        if t["res"].x is None:
            continue
        lp = solve_lp(t["model"])
        margin = t["res"].objective - lp.objective
        margins.append(margin)
        if margin < -1e-6 * max(1.0, abs(lp.objective)):
            bad.append(t["seed"])
    for case, _, cell in _solved_schedules(synthetic_grid):
        _, _, model, _ = _model(case)
        lp = solve_lp(model)
        margin = cell.objective - lp.objective
        margins.append(margin)
        if margin < -1e-6 * abs(lp.objective):
            bad.append((case.flex.delta1, case.flex.delta2))
    ok = not bad
    record("C9", ok, f"{len(margins)} solves, LP-to-MILP margin min {min(margins):.3g} "
                     f"median {np.median(margins):.3g} max {max(margins):.3g}, violations {bad}")
    assert ok


def test_c10_mps_roundtrip_and_external_optimum(tiny_suite, tmp_path):
    suite = tiny_suite[0]
    models = [t["model"] for t in suite[:8]] + [_model(smoke_instance())[2],
                                                _model(synthetic_instance().with_flex(0.5, 2.0))[2]]
    identical = sum(to_mps(parse_mps(to_mps(m).text)).text == to_mps(m).text for m in models)
    worst, bad = 0.0, []
    for t in suite:
        path = tmp_path / f"tiny{t['seed']}.mps"
        path.write_text(to_mps(t["model"]).text)
        ext = highs_mps_optimum(path)
        res = solve_milp(t["model"], SolveOptions(rel_gap=1e-9))
        if (ext is None) != (res.x is None):
            bad.append(t["seed"])
            continue
        if ext is None:
            continue
        diff = abs(ext - res.objective)
        worst = max(worst, diff)
        if diff > 1e-6:
            bad.append(t["seed"])
    ok = identical == len(models) and not bad
    record("C10", ok, f"{identical}/{len(models)} byte-identical MPS round trips; external optimum vs native on "
                      f"{len(suite)} tiny instances, worst diff {worst:.1e}, mismatches {bad}")
    assert ok
