"""LP-based branch-and-bound over the binary columns of a :class:`MilpModel`."""

from __future__ import annotations

import heapq
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..model import MilpModel
from .lp import (FAILED, INFEASIBLE, LIMIT, OPTIMAL, UNBOUNDED, SolveResult, infeasibility_hint,
                 make_engine)

log = logging.getLogger(__name__)

THREADS_ENV = "MGFLEX_THREADS"


@dataclass(frozen=True)
class SolveOptions:
    rel_gap: float = 1e-4
    feas_tol: float = 1e-6
    int_tol: float = 1e-5
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    branching: str = "pseudo-cost"  # or "most-fractional"
    node_order: str = "best-bound"  # or "depth-first"
    backend: str = "highs"
    threads: Optional[int] = None
    dive: bool = True
    log_every: int = 50

    def __post_init__(self):
        for name in ("rel_gap", "feas_tol", "int_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.branching not in ("most-fractional", "pseudo-cost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_order not in ("best-bound", "depth-first"):
            raise ValueError(f"unknown node order {self.node_order!r}")

    def thread_count(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        return max(1, int(os.environ.get(THREADS_ENV, "1")))


@dataclass
class _Node:
    bound: float
    depth: int
    fixes: tuple  # ((col, value), ...)
    parent_obj: float
    branch: Optional[tuple] = None  # (col, direction, fractional part)


class _PseudoCosts:
    def __init__(self, n):
        self.sum = np.zeros((2, n))
        self.count = np.zeros((2, n))

    def update(self, col, direction, frac, gain):
        dist = frac if direction == 0 else 1.0 - frac
        if dist > 1e-9 and np.isfinite(gain):
            self.sum[direction, col] += max(gain, 0.0) / dist
            self.count[direction, col] += 1

    def score(self, cols, fracs):
        known = self.count > 0
        avg = np.where(known, self.sum / np.maximum(self.count, 1), np.nan)
        fallback = [np.nanmean(avg[d]) if known[d].any() else 1.0 for d in (0, 1)]
        down = np.where(known[0, cols], avg[0, cols], fallback[0]) * fracs
        up = np.where(known[1, cols], avg[1, cols], fallback[1]) * (1 - fracs)
        return np.maximum(down, 1e-6) * np.maximum(up, 1e-6)


def _fractional(x, binaries, int_tol):
    vals = x[binaries]
    frac = np.abs(vals - np.round(vals))
    mask = frac > int_tol
    return binaries[mask], vals[mask] - np.floor(vals[mask])


def solve_milp(model: MilpModel, opts: SolveOptions = SolveOptions(),
               log_sink: Optional[Callable[[str], None]] = None) -> SolveResult:
    """Branch-and-bound with best-bound (default) or depth-first node selection.

    Branching picks the binary with the best pseudo-cost score (or the
    most fractional one), ties going to the lowest column index. Node LPs can be evaluated in
    batches on several threads; batches are processed in pop order, so the
    search is deterministic for a given thread count.
    """
    start = time.perf_counter()
    binaries = np.flatnonzero(model.binary)
    engine = make_engine(model, opts.backend, feas_tol=min(opts.feas_tol, 1e-9))
    lb0 = model.lb.copy()
    ub0 = model.ub.copy()
    lb0[binaries] = np.maximum(lb0[binaries], 0.0)
    ub0[binaries] = np.minimum(ub0[binaries], 1.0)
    events: list[dict] = []
    threads = opts.thread_count()

    def elapsed():
        return time.perf_counter() - start

    def emit(node_count, bound, incumbent):
        gap = (incumbent - bound) / max(abs(incumbent), 1e-10) if np.isfinite(incumbent) else None
        rec = {"node": node_count, "bound": bound, "incumbent": incumbent if np.isfinite(incumbent) else None,
               "gap": gap, "time": round(elapsed(), 4)}
        events.append(rec)
        if log_sink is not None:
            log_sink(json.dumps(rec))

    def bounds_for(fixes):
        lb, ub = lb0.copy(), ub0.copy()
        for col, val in fixes:
            lb[col] = ub[col] = val
        return lb, ub

    def solve_node(fixes):
        lb, ub = bounds_for(fixes)
        return engine(lb, ub)

    root = solve_node(())
    if root.status != "optimal":
        status = {"infeasible": INFEASIBLE, "unbounded": UNBOUNDED, "limit": LIMIT}.get(root.status, FAILED)
        hint = infeasibility_hint(model, lb0, ub0) if status == INFEASIBLE else None
        return SolveResult(status, np.nan, np.inf if status == INFEASIBLE else -np.inf, None, nodes=1,
                           wall_time=elapsed(), message=root.message, hint=hint, log=events)
    root_obj = root.objective

    incumbent = np.inf
    best_x: Optional[np.ndarray] = None
    incumbents: list[np.ndarray] = []

    def polish(x):
        """Fix binaries at their rounded values and re-solve for clean continuous values."""
        fixes = tuple((int(j), float(round(x[j]))) for j in binaries)
        out = solve_node(fixes)
        if out.status != "optimal":
            return None
        xp = out.x.copy()
        xp[binaries] = np.round(xp[binaries])
        return xp

    def offer(x, node_count):
        nonlocal incumbent, best_x
        xp = polish(x)
        if xp is None:
            return False
        obj = float(model.c @ xp)
        if obj < incumbent - 1e-12:
            first = not np.isfinite(incumbent)
            incumbent, best_x = obj, xp
            incumbents.append(xp)
            if first:
                rekey()
            emit(node_count, min(best_bound(), obj), incumbent)
            return True
        return False

    def cutoff():
        if not np.isfinite(incumbent):
            return np.inf
        return incumbent - opts.rel_gap * max(abs(incumbent), 1e-10)

    heap: list = []
    seq = 0
    pseudo = _PseudoCosts(model.n_cols)
    pruned_bound = np.inf  # smallest LP bound among nodes discarded against the cutoff

    def best_bound():
        return min([item[-1].bound for item in heap] + [pruned_bound])

    def key_of(node: _Node, order: int):
        # depth-first until an incumbent exists, then the configured order
        if opts.node_order == "depth-first" or not np.isfinite(incumbent):
            return (-node.depth, -order)
        return (node.bound, -node.depth, order)

    def push(node: _Node):
        nonlocal seq
        seq += 1
        heapq.heappush(heap, (key_of(node, seq), seq, node))

    def rekey():
        heap[:] = [(key_of(node, order), order, node) for _, order, node in heap]
        heapq.heapify(heap)

    def prune(bound):
        nonlocal pruned_bound
        pruned_bound = min(pruned_bound, bound)

    def choose_branch(x):
        cols, fracs = _fractional(x, binaries, opts.int_tol)
        if cols.size == 0:
            return None
        if opts.branching == "pseudo-cost":
            score = pseudo.score(cols, fracs)
        else:
            score = -np.abs(fracs - 0.5)
        pick = int(np.flatnonzero(score >= score.max() - 1e-12)[0])
        return int(cols[pick]), float(fracs[pick])

    def branch(node_fixes, depth, obj, x):
        col, frac = choose_branch(x)
        first = 1.0 if frac >= 0.5 else 0.0
        # the rounded direction goes last so depth-first explores it first
        for val in (1.0 - first, first):
            push(_Node(obj, depth + 1, node_fixes + ((col, val),), obj, (col, int(val), frac)))

    nodes = 1
    if choose_branch(root.x) is None:
        offer(root.x, nodes)
    else:
        offer(_round_up(root.x, binaries, opts), nodes)
        if opts.dive:
            deadline = None if opts.time_limit is None else start + 0.5 * opts.time_limit
            for rule in ("up", "fractional"):
                _dive(root.x, binaries, opts, solve_node, lambda x: offer(x, nodes), deadline, rule)
        branch((), 0, root_obj, root.x)
    emit(nodes, min(best_bound(), incumbent), incumbent)

    status = OPTIMAL
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while heap:
            if opts.node_limit is not None and nodes >= opts.node_limit:
                status = LIMIT
                break
            if opts.time_limit is not None and elapsed() >= opts.time_limit:
                status = LIMIT
                break
            if np.isfinite(incumbent) and (incumbent - best_bound()) <= opts.rel_gap * max(abs(incumbent), 1e-10):
                break
            batch = []
            while heap and len(batch) < threads:
                node = heapq.heappop(heap)[-1]
                if node.bound >= cutoff():
                    prune(node.bound)
                else:
                    batch.append(node)
            if not batch:
                continue
            if pool is not None:
                outs = list(pool.map(lambda nd: solve_node(nd.fixes), batch))
            else:
                outs = [solve_node(nd.fixes) for nd in batch]
            for node, out in zip(batch, outs):
                nodes += 1
                if node.branch is not None and out.status == "optimal":
                    col, direction, frac = node.branch
                    pseudo.update(col, direction, frac, out.objective - node.parent_obj)
                if out.status == "infeasible":
                    continue
                if out.status != "optimal":
                    log.warning("node LP ended with status %s; node dropped", out.status)
                    status = FAILED
                    continue
                if out.objective >= cutoff():
                    prune(out.objective)
                elif choose_branch(out.x) is None:
                    prune(out.objective)
                    offer(out.x, nodes)
                else:
                    branch(node.fixes, node.depth, out.objective, out.x)
            if nodes % opts.log_every < len(batch):
                emit(nodes, min(best_bound(), incumbent), incumbent)
    finally:
        if pool is not None:
            pool.shutdown()

    bound = min(best_bound(), incumbent)
    if best_x is None:
        if status == OPTIMAL:
            hint = "integrality: the LP relaxation is feasible but no binary assignment is"
            return SolveResult(INFEASIBLE, np.nan, np.inf, None, nodes, elapsed(), root_obj, hint=hint, log=events)
        return SolveResult(status, np.nan, bound, None, nodes, elapsed(), root_obj, log=events)
    emit(nodes, bound, incumbent)
    off = model.obj_offset
    return SolveResult(status, incumbent + off, bound + off, best_x, nodes, elapsed(), root_obj + off, log=events,
                       incumbents=incumbents)


def _dive(x, binaries, opts, solve_node, offer, deadline=None, rule="fractional"):
    """LP diving from the root.

    Each step fixes one fractional binary and re-solves, trying the other
    value if that LP is infeasible. ``rule="fractional"`` fixes the least
    fractional binary at its nearest value; ``rule="up"`` fixes the
    lowest-index fractional binary at 1, which walks forward through
    time-ordered commitment columns. The dive ends at an integral LP point,
    which is offered as an incumbent, or when both values fail.
    """
    fixes: dict[int, float] = {}
    for _ in range(binaries.size + 1):
        if deadline is not None and time.perf_counter() > deadline:
            return
        vals = x[binaries]
        dist = np.abs(vals - np.round(vals))
        frac_idx = np.flatnonzero(dist > opts.int_tol)
        if frac_idx.size == 0:
            offer(x)
            return
        if rule == "up":
            pick, first = frac_idx[0], 1.0
        else:
            pick = frac_idx[np.argmin(dist[frac_idx])]
            first = float(round(vals[pick]))
        j = int(binaries[pick])
        for val in (first, 1.0 - first):
            fixes[j] = val
            out = solve_node(tuple(sorted(fixes.items())))
            if out.status == "optimal":
                x = out.x
                break
        else:
            return


def _round_up(x, binaries, opts):
    """Round every fractional binary up: more committed capacity is the safer guess."""
    xr = x.copy()
    vals = xr[binaries]
    xr[binaries] = np.where(vals > opts.int_tol, 1.0, 0.0)
    return xr
