"""Ramp-limit sweeps and the incentive a grid operator owes for each limit pair."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .builder import assemble
from .core import MicrogridInstance
from .envelope import build_envelope
from .scenarios import ScenarioSet, generate_scenarios
from .schedule import Schedule, extract_schedule
from .solver import SolveOptions, solve_milp
from .solver.lp import OPTIMAL
from .validator import check_schedule

log = logging.getLogger(__name__)


@dataclass
class CellResult:
    delta1: Optional[float]
    delta2: Optional[float]
    status: str
    objective: float = np.nan
    gap: float = np.nan
    curtailed_mwh: float = np.nan
    wall_time: float = 0.0
    root_bound: float = np.nan
    validated: bool = False
    message: str = ""
    schedule: Optional[Schedule] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.validated and np.isfinite(self.objective)


@dataclass
class SweepResult:
    delta1: list[float]
    delta2: list[float]
    cells: dict  # (delta2, delta1) -> CellResult
    baseline: Optional[CellResult] = None
    rel_gap: float = 1e-4

    def objective_grid(self) -> np.ndarray:
        """Objectives with rows = delta2 and columns = delta1 (NaN where a cell failed)."""
        return np.array([[self.cells[(d2, d1)].objective if self.cells[(d2, d1)].ok else np.nan
                          for d1 in self.delta1] for d2 in self.delta2])

    def write_table_csv(self, path, include_baseline: bool = True):
        """Rows per delta2, columns per delta1; an optional last row holds the baseline."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta2\\delta1"] + [_fmt(d) for d in self.delta1])
            grid = self.objective_grid()
            for d2, row in zip(self.delta2, grid):
                w.writerow([_fmt(d2)] + ["" if np.isnan(v) else repr(float(v)) for v in row])
            if include_baseline and self.baseline is not None and self.baseline.ok:
                w.writerow(["baseline", repr(float(self.baseline.objective))])
        return Path(path)

    def write_cells_csv(self, path):
        cols = ("delta1", "delta2", "status", "validated", "objective", "gap", "root_bound", "curtailed_mwh",
                "wall_time")
        cells = list(self.cells.values()) + ([self.baseline] if self.baseline is not None else [])
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for c in cells:
                w.writerow(["" if c.delta1 is None else c.delta1, "" if c.delta2 is None else c.delta2, c.status,
                            int(c.validated), c.objective, c.gap, c.root_bound, c.curtailed_mwh,
                            round(c.wall_time, 3)])
        return Path(path)


def _fmt(x) -> str:
    return repr(float(x))


def solve_cell(inst: MicrogridInstance, delta1, delta2, opts: SolveOptions,
               scen: Optional[ScenarioSet] = None, keep_schedule: bool = False, tol: float = 1e-6) -> CellResult:
    """Solve one limit pair and run the independent validator on the result."""
    start = time.perf_counter()
    try:
        case = inst.with_flex(delta1, delta2)
        scen = scen or generate_scenarios(case.grid, case.islanding_k, case.psi_base, case.scenario_stride)
        env = build_envelope(case)
        model, vi = assemble(case, env, scen)
        res = solve_milp(model, opts)
    except Exception as exc:  # recorded in-grid, the sweep carries on
        log.exception("cell delta1=%s delta2=%s failed", delta1, delta2)
        return CellResult(delta1, delta2, "error", message=str(exc), wall_time=time.perf_counter() - start)
    cell = CellResult(delta1, delta2, res.status, wall_time=time.perf_counter() - start,
                      root_bound=np.nan if res.root_bound is None else res.root_bound, message=res.hint or "")
    if res.x is None:
        return cell
    sched = extract_schedule(res, vi, case, scen)
    report = check_schedule(case, scen, env, sched, tol)
    cell.validated = report.passed
    if not report.passed:
        cell.message = f"validator rejected the schedule: {sorted(report.families())}"
        return cell
    cell.objective = res.objective
    cell.gap = res.gap
    cell.curtailed_mwh = float(np.sum(sched.LS[:, :, 0]) / case.grid.K)
    if keep_schedule:
        cell.schedule = sched
    return cell


def run_sweep(inst: MicrogridInstance, delta1_list: Sequence[float], delta2_list: Sequence[float],
              opts: SolveOptions = SolveOptions(), workers: int = 1, baseline: bool = True) -> SweepResult:
    """One solve per (delta2, delta1) pair plus a price-based baseline without ramp limits.

    Cells are independent (no warm starts), so the result does not depend on
    evaluation order or on ``workers``.
    """
    d1s = [float(x) for x in delta1_list]
    d2s = [float(x) for x in delta2_list]
    if not d1s or not d2s:
        raise ValueError("delta lists must be non-empty")
    if min(d1s + d2s) < 0:
        raise ValueError("ramp limits must be >= 0")
    scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
    jobs = [(d2, d1) for d2 in d2s for d1 in d1s]
    if baseline:
        jobs.append((None, None))

    def run(job):
        d2, d1 = job
        return solve_cell(inst, d1, d2, opts, scen)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    base = results.pop() if baseline else None
    cells = {job: res for job, res in zip(jobs, results)}
    return SweepResult(d1s, d2s, cells, base, opts.rel_gap)


@dataclass
class Incentive:
    delta1: float
    delta2: float
    value: float
    flagged: bool = False  # objective fell below baseline by more than the solver gap


def compute_incentives(sweep: SweepResult, baseline: Optional[float] = None) -> dict:
    """``objective - baseline`` per cell.

    Small negative differences (within the solver gap) are floored at zero;
    larger ones are kept and flagged since tightening limits cannot lower
    the true optimum.
    """
    if baseline is None:
        if sweep.baseline is None or not np.isfinite(sweep.baseline.objective):
            raise ValueError("incentives need a solved baseline")
        baseline = sweep.baseline.objective
    out = {}
    for (d2, d1), cell in sweep.cells.items():
        if not np.isfinite(cell.objective):
            continue
        diff = cell.objective - baseline
        slack = 2 * sweep.rel_gap * max(abs(cell.objective), abs(baseline))
        flagged = diff < -slack
        if diff < 0 and not flagged:
            diff = 0.0
        out[(d2, d1)] = Incentive(d1, d2, float(diff), flagged)
    return out


def read_table_csv(path, rel_gap: float = 1e-4) -> SweepResult:
    """Load a cost table (rows delta2, columns delta1, optional ``baseline`` row)."""
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(x.strip() for x in r)]
    if not rows:
        raise ValueError(f"{path}: empty table")
    d1s = [float(x) for x in rows[0][1:]]
    cells, d2s, base = {}, [], None
    for lineno, row in enumerate(rows[1:], start=2):
        head = row[0].strip()
        if head.lower() == "baseline":
            base = CellResult(None, None, OPTIMAL, float(row[1]), validated=True)
            continue
        d2 = float(head)
        d2s.append(d2)
        if len(row) - 1 != len(d1s):
            raise ValueError(f"{path}, line {lineno}: expected {len(d1s)} values, got {len(row) - 1}")
        for d1, val in zip(d1s, row[1:]):
            val = val.strip()
            obj = float(val) if val else np.nan
            cells[(d2, d1)] = CellResult(d1, d2, OPTIMAL if val else "missing", obj, validated=bool(val))
    return SweepResult(d1s, d2s, cells, base, rel_gap)


def write_incentives_csv(incentives: dict, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta1", "delta2", "incentive", "flagged"])
        for (d2, d1), inc in sorted(incentives.items()):
            w.writerow([d1, d2, repr(inc.value), int(inc.flagged)])
    return Path(path)
