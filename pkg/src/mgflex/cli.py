"""Command line entry point: ``mgflex solve|sweep|validate|export-mps|incentives``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .builder import assemble
from .envelope import build_envelope
from .io import (CaseError, load_case, write_envelope_csv, write_json, write_scenarios_csv, write_schedule_csv)
from .scenarios import generate_scenarios
from .schedule import Schedule, extract_schedule
from .solver import SolveOptions, solve_lp, solve_milp
from .solver.bnb import THREADS_ENV
from .solver.mps import to_mps
from .sweep import compute_incentives, read_table_csv, run_sweep, write_incentives_csv
from .validator import check_schedule

log = logging.getLogger("mgflex")

EXIT_OK, EXIT_INVALID, EXIT_NO_SOLUTION, EXIT_INPUT = 0, 1, 2, 3


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _case(args, flex: bool = True):
    inst = load_case(args.case)
    if getattr(args, "stride", None) is not None:
        inst = inst.with_stride(args.stride)
    if not flex:
        return inst
    d1 = getattr(args, "delta1", None)
    d2 = getattr(args, "delta2", None)
    if d1 is not None or d2 is not None:
        inst = inst.with_flex(d1 if d1 is not None else inst.flex.delta1, d2 if d2 is not None else inst.flex.delta2)
    return inst


def _options(args) -> SolveOptions:
    return SolveOptions(rel_gap=args.gap, time_limit=args.time_limit, threads=args.threads,
                        branching=args.branching, backend=args.backend)


def _add_solver_flags(p):
    p.add_argument("--gap", type=float, default=1e-4, help="relative optimality gap (default 1e-4)")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per solve")
    p.add_argument("--threads", type=int, default=None, help=f"node LP threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--branching", choices=("most-fractional", "pseudo-cost"), default="pseudo-cost")
    p.add_argument("--backend", choices=("highs", "native"), default="highs", help="node LP engine")


def cmd_solve(args) -> int:
    inst = _case(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
    env = build_envelope(inst)
    if args.dump_envelope:
        if env is None:
            log.warning("no flexibility limits set; envelope dump skipped")
        else:
            write_envelope_csv(env, out / "envelope.csv")
    if args.dump_scenarios:
        write_scenarios_csv(scen, out / "scenarios.csv")
    model, vi = assemble(inst, env, scen)
    stats = model.stats()
    print(json.dumps(stats))
    with (out / "solve_log.jsonl").open("w") as fh:
        res = solve_milp(model, _options(args), log_sink=lambda line: fh.write(line + "\n"))
    summary = {"case": inst.name, "delta1": inst.flex.delta1, "delta2": inst.flex.delta2,
               "scenarios": scen.S, "model": stats, "status": res.status, "nodes": res.nodes,
               "wall_time": res.wall_time, "root_bound": res.root_bound, "bound": res.bound}
    if res.x is None:
        summary["message"] = res.message
        summary["hint"] = res.hint
        write_json(summary, out / "summary.json")
        print(json.dumps({"status": res.status, "hint": res.hint}))
        return EXIT_NO_SOLUTION
    sched = extract_schedule(res, vi, inst, scen)
    sched.meta.update({"delta1": inst.flex.delta1, "delta2": inst.flex.delta2, "stride": inst.scenario_stride})
    report = check_schedule(inst, scen, env, sched)
    lp = solve_lp(model)
    sched.save(out / "schedule.json")
    write_schedule_csv(inst, sched, out / "schedule.csv", scenarios=None if args.all_scenarios else [0])
    write_json(report.to_dict(), out / "validation.json")
    summary.update({
        "objective": res.objective, "gap": res.gap, "lp_relaxation": lp.objective,
        "lp_margin": res.objective - lp.objective, "incumbents": len(res.incumbents),
        "costs": sched.to_dict()["costs"], "curtailed_mwh": float(np.sum(sched.LS[:, :, 0]) / inst.grid.K),
        "validated": report.passed, "max_residual": report.max_residual,
    })
    write_json(summary, out / "summary.json")
    print(json.dumps({"status": res.status, "objective": res.objective, "gap": res.gap,
                      "validated": report.passed}))
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_sweep(args) -> int:
    inst = _case(args, flex=False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run_sweep(inst, args.delta1, args.delta2, _options(args), workers=args.workers,
                    baseline=not args.no_baseline)
    res.write_table_csv(out / "sweep_table.csv")
    res.write_cells_csv(out / "sweep_cells.csv")
    summary = {"case": inst.name, "cells": len(res.cells),
               "failed": sum(not c.ok for c in res.cells.values()),
               "baseline": None if res.baseline is None else res.baseline.objective}
    if res.baseline is not None and res.baseline.ok:
        inc = compute_incentives(res)
        write_incentives_csv(inc, out / "incentives.csv")
        summary["flagged"] = sum(i.flagged for i in inc.values())
    write_json(summary, out / "summary.json")
    print(json.dumps(summary))
    return EXIT_OK if summary["failed"] == 0 else EXIT_NO_SOLUTION


def cmd_validate(args) -> int:
    sched = Schedule.load(args.schedule)
    meta = sched.meta
    if args.delta1 is None and args.delta2 is None:
        args.delta1, args.delta2 = meta.get("delta1"), meta.get("delta2")
    if args.stride is None:
        args.stride = meta.get("stride")
    inst = _case(args)
    scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
    try:
        report = check_schedule(inst, scen, build_envelope(inst), sched, tol=args.tol)
    except ValueError as exc:
        print(json.dumps({"passed": False, "error": str(exc)}))
        return EXIT_INVALID
    print(report.to_json())
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_export_mps(args) -> int:
    inst = _case(args)
    scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
    model, _ = assemble(inst, build_envelope(inst), scen)
    export = to_mps(model)
    if args.output:
        Path(args.output).write_text(export.text)
    else:
        sys.stdout.write(export.text)
    if export.renamed:
        log.warning("%d names were changed to keep them unique", len(export.renamed))
    return EXIT_OK


def cmd_incentives(args) -> int:
    table = read_table_csv(args.table)
    inc = compute_incentives(table, baseline=args.baseline)
    if args.output:
        write_incentives_csv(inc, args.output)
    for (d2, d1), item in sorted(inc.items()):
        print(json.dumps({"delta1": d1, "delta2": d2, "incentive": round(item.value, 6), "flagged": item.flagged}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mgflex", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def case_args(p, flex=True):
        p.add_argument("case", help="case JSON file")
        p.add_argument("--stride", type=int, default=None, help="keep every n-th islanding start")
        if flex:
            p.add_argument("--delta1", type=float, default=None, help="intra-hour ramp limit (MW)")
            p.add_argument("--delta2", type=float, default=None, help="inter-hour ramp limit (MW)")

    p = sub.add_parser("solve", help="solve one case and write reports")
    case_args(p)
    _add_solver_flags(p)
    p.add_argument("--out", default="out", help="report directory")
    p.add_argument("--dump-envelope", action="store_true", help="write envelope.csv")
    p.add_argument("--dump-scenarios", action="store_true", help="write scenarios.csv")
    p.add_argument("--all-scenarios", action="store_true", help="schedule.csv for every scenario, not just the base")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve a grid of ramp limits plus the unconstrained baseline")
    case_args(p, flex=False)
    p.add_argument("--delta1", type=_floats, required=True, help="comma separated intra-hour limits")
    p.add_argument("--delta2", type=_floats, required=True, help="comma separated inter-hour limits")
    _add_solver_flags(p)
    p.add_argument("--workers", type=int, default=1, help="cells solved in parallel")
    p.add_argument("--no-baseline", action="store_true")
    p.add_argument("--out", default="out", help="report directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a schedule against every constraint family")
    case_args(p)
    p.add_argument("schedule", help="schedule JSON written by solve")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-mps", help="write the model in MPS format")
    case_args(p)
    p.add_argument("-o", "--output", default=None, help="file (default stdout)")
    p.set_defaults(func=cmd_export_mps)

    p = sub.add_parser("incentives", help="incentives from a cost table CSV")
    p.add_argument("table", help="CSV with rows delta2, columns delta1, optional baseline row")
    p.add_argument("--baseline", type=float, default=None, help="overrides the table's baseline row")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_incentives)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CaseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
