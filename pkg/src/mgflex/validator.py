"""Independent feasibility checks and a brute-force optimum for tiny instances.

Nothing here touches the builder: every constraint is re-evaluated with
plain loops over the raw instance data. The brute-force search writes its
own dense LP per binary assignment (generation cost as an epigraph instead
of segment columns) and solves it with the in-house simplex by default.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import MicrogridInstance
from .envelope import FlexibilityEnvelope
from .scenarios import ScenarioSet
from .schedule import Schedule
from .solver.simplex import dual_simplex

FAMILIES = ("balance", "exchange", "capacity", "ramp", "updown", "storage", "adjustable",
            "flexibility", "utility-ramp")


@dataclass
class Breach:
    family: str
    where: str
    residual: float


@dataclass
class ViolationReport:
    tol: float
    breaches: list[Breach] = field(default_factory=list)
    max_residual: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.breaches

    def families(self) -> set[str]:
        return {b.family for b in self.breaches}

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "max_residual": self.max_residual,
                "violations": [{"family": b.family, "where": b.where, "residual": b.residual}
                               for b in self.breaches]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class _Checker:
    def __init__(self, tol):
        self.report = ViolationReport(tol)

    def at_most(self, family, where, value, limit):
        """Record ``value <= limit``; the residual is the excess."""
        excess = float(value - limit)
        self.report.max_residual = max(self.report.max_residual, max(excess, 0.0))
        if excess > self.report.tol:
            self.report.breaches.append(Breach(family, where, excess))

    def equal(self, family, where, value, target):
        gap = abs(float(value - target))
        self.report.max_residual = max(self.report.max_residual, gap)
        if gap > self.report.tol:
            self.report.breaches.append(Breach(family, where, gap))

    def binary(self, family, where, value):
        self.equal(family, where, value, round(float(value)))


def _agg(inst):
    T, K = inst.grid.T, inst.grid.K
    agg = np.zeros((T, K))
    for series in inst.fixed_series:
        if series.kind == "prosumer-net-load":
            agg += np.asarray(series.values, dtype=float).reshape(T, K)
    return agg


def _series(inst, kind):
    T, K = inst.grid.T, inst.grid.K
    total = np.zeros((T, K))
    for series in inst.fixed_series:
        if series.kind == kind:
            total += np.asarray(series.values, dtype=float).reshape(T, K)
    return total


def _flex_binds(inst, scen, s, a, b):
    if inst.flex_scope == "all":
        return True
    return scen.w[a[0], a[1], s] == 1 and scen.w[b[0], b[1], s] == 1


def _check_shapes(inst, scen, sched):
    T, K, S = inst.grid.T, inst.grid.K, scen.S
    expect = {"PM": (T, K, S), "LS": (T, K, S)}
    problems = []
    for name, shape in expect.items():
        if np.shape(getattr(sched, name)) != shape:
            problems.append(f"{name} has shape {np.shape(getattr(sched, name))}, expected {shape}")
    for g in inst.units:
        if g.id not in sched.P or np.shape(sched.P[g.id]) != (T, K, S) or np.shape(sched.I.get(g.id)) != (T,):
            problems.append(f"unit {g.id} dispatch/commitment missing or misshaped")
    for b in inst.storages:
        for name in ("Pdch", "Pch", "C"):
            if np.shape(getattr(sched, name).get(b.id)) != (T, K, S):
                problems.append(f"storage {b.id} {name} missing or misshaped")
        for name in ("u", "v"):
            if np.shape(getattr(sched, name).get(b.id)) != (T,):
                problems.append(f"storage {b.id} {name} missing or misshaped")
    for d in inst.adjustable:
        if np.shape(sched.D.get(d.id)) != (T, K) or np.shape(sched.z.get(d.id)) != (T,):
            problems.append(f"load {d.id} D/z missing or misshaped")
    if problems:
        raise ValueError("schedule does not match instance: " + "; ".join(problems))


def _run_breaches(seq, before, need, value, last=None):
    """Hours (1-based start, shortfall) where a run of ``value`` starting there ends too early.

    A run starts at t when ``seq[t] == value`` and the previous state is not.
    It must last ``min(need, T - t + 1)`` hours; hours past ``last`` count as
    the opposite state.
    """
    T = len(seq)
    last = T if last is None else last
    out = []
    prev = before
    for t in range(1, T + 1):
        cur = seq[t - 1]
        if cur == value and prev != value:
            span = min(need, T - t + 1)
            held = sum(1 for tt in range(t, t + span) if tt <= last and seq[tt - 1] == value)
            if held < span:
                out.append((t, span - held))
        prev = cur
    return out


def check_schedule(inst: MicrogridInstance, scen: ScenarioSet, env: Optional[FlexibilityEnvelope],
                   sched: Schedule, tol: float = 1e-6) -> ViolationReport:
    """Evaluate every constraint family on ``sched`` by direct arithmetic."""
    _check_shapes(inst, scen, sched)
    T, K, S = inst.grid.T, inst.grid.K, scen.S
    tau = 1.0 / K
    chk = _Checker(tol)
    fixed = _series(inst, "fixed-load")
    nondisp = _series(inst, "nondispatchable-generation")
    agg = _agg(inst)

    # balance and curtailment limits
    for s in range(S):
        for t in range(T):
            for k in range(K):
                where = f"t{t + 1} k{k + 1} s{s}"
                supply = sum(sched.P[g.id][t, k, s] for g in inst.units)
                supply += sum(sched.Pdch[b.id][t, k, s] - sched.Pch[b.id][t, k, s] for b in inst.storages)
                supply += sched.PM[t, k, s] + sched.LS[t, k, s]
                flexible = sum(sched.D[d.id][t, k] for d in inst.adjustable if d.alpha <= t + 1 <= d.beta)
                chk.equal("balance", where, supply, fixed[t, k] - nondisp[t, k] + flexible)
                chk.at_most("balance", where + " LS>=0", -sched.LS[t, k, s], 0.0)
                cap = fixed[t, k] + flexible if inst.curtailment_allowed else 0.0
                chk.at_most("balance", where + " LS<=demand", sched.LS[t, k, s], cap)
                lim = inst.PMmax * scen.w[t, k, s]
                chk.at_most("exchange", where, abs(sched.PM[t, k, s]), lim)

    for g in inst.units:
        on = np.asarray(sched.I[g.id], dtype=float)
        for t in range(T):
            chk.binary("updown", f"{g.id} t{t + 1} I", on[t])
        on_i = [int(round(x)) for x in on]
        P = sched.P[g.id]
        for s in range(S):
            for t in range(T):
                for k in range(K):
                    where = f"{g.id} t{t + 1} k{k + 1} s{s}"
                    chk.at_most("capacity", where + " max", P[t, k, s], g.Pmax * on_i[t])
                    chk.at_most("capacity", where + " min", g.Pmin * on_i[t], P[t, k, s])
                    if t == 0 and k == 0:
                        if not g.initially_on:
                            continue
                        before = g.initial_power
                    else:
                        before = P[t, k - 1, s] if k > 0 else P[t - 1, K - 1, s]
                    chk.at_most("ramp", where + " up", P[t, k, s] - before, g.UR)
                    chk.at_most("ramp", where + " down", before - P[t, k, s], g.DR)
        before = 1 if g.initially_on else 0
        for t, short in _run_breaches(on_i, before, g.UT, 1):
            chk.at_most("updown", f"{g.id} start t{t}", short, 0)
        for t, short in _run_breaches(on_i, before, g.DT, 0):
            chk.at_most("updown", f"{g.id} stop t{t}", short, 0)
        h = g.initial_status
        if h is not None and h > 0:
            for t in range(min(T, g.UT - h)):
                chk.at_most("updown", f"{g.id} t{t + 1} history", 1 - on_i[t], 0)
        elif h is not None and h < 0:
            for t in range(min(T, g.DT + h)):
                chk.at_most("updown", f"{g.id} t{t + 1} history", on_i[t], 0)

    for b in inst.storages:
        u = np.asarray(sched.u[b.id], dtype=float)
        v = np.asarray(sched.v[b.id], dtype=float)
        for t in range(T):
            chk.binary("storage", f"{b.id} t{t + 1} u", u[t])
            chk.binary("storage", f"{b.id} t{t + 1} v", v[t])
            chk.at_most("storage", f"{b.id} t{t + 1} u+v", u[t] + v[t], 1.0)
        ui = [int(round(x)) for x in u]
        vi = [int(round(x)) for x in v]
        dch, ch, C = sched.Pdch[b.id], sched.Pch[b.id], sched.C[b.id]
        for s in range(S):
            level = b.C0
            for t in range(T):
                for k in range(K):
                    where = f"{b.id} t{t + 1} k{k + 1} s{s}"
                    chk.at_most("storage", where + " dch max", dch[t, k, s], b.Pdch_max * ui[t])
                    chk.at_most("storage", where + " dch min", b.Pdch_min * ui[t], dch[t, k, s])
                    chk.at_most("storage", where + " ch max", ch[t, k, s], b.Pch_max * vi[t])
                    chk.at_most("storage", where + " ch min", b.Pch_min * vi[t], ch[t, k, s])
                    chk.at_most("storage", where + " dch>=0", -dch[t, k, s], 0.0)
                    chk.at_most("storage", where + " ch>=0", -ch[t, k, s], 0.0)
                    level = level - dch[t, k, s] * tau / b.eta + ch[t, k, s] * tau
                    chk.equal("storage", where + " soc", C[t, k, s], level)
                    level = C[t, k, s]
                    chk.at_most("storage", where + " soc max", C[t, k, s], b.Cmax)
                    chk.at_most("storage", where + " soc min", b.Cmin, C[t, k, s])
            end = C[T - 1, K - 1, s]
            if b.terminal_policy == "at-least-initial":
                chk.at_most("storage", f"{b.id} s{s} terminal", b.C0, end)
            elif b.terminal_policy == "equal-initial":
                chk.equal("storage", f"{b.id} s{s} terminal", end, b.C0)
        for t, short in _run_breaches(ui, 0, b.MD, 1):
            chk.at_most("storage", f"{b.id} discharge run t{t}", short, 0)
        for t, short in _run_breaches(vi, 0, b.MC, 1):
            chk.at_most("storage", f"{b.id} charge run t{t}", short, 0)

    for d in inst.adjustable:
        z = np.asarray(sched.z[d.id], dtype=float)
        D = sched.D[d.id]
        zi = []
        for t in range(T):
            chk.binary("adjustable", f"{d.id} t{t + 1} z", z[t])
            inside = d.alpha <= t + 1 <= d.beta
            zt = int(round(z[t])) if inside else 0
            if not inside:
                chk.at_most("adjustable", f"{d.id} t{t + 1} z outside window", abs(z[t]), 0.0)
            zi.append(zt)
            for k in range(K):
                where = f"{d.id} t{t + 1} k{k + 1}"
                chk.at_most("adjustable", where + " max", D[t, k], d.Dmax * zt)
                chk.at_most("adjustable", where + " min", d.Dmin * zt, D[t, k])
        energy = sum(tau * D[t, k] for t in range(T) for k in range(K))
        chk.equal("adjustable", f"{d.id} energy", energy, d.E)
        for t, short in _run_breaches(zi, 0, d.MU, 1, last=d.beta):
            chk.at_most("adjustable", f"{d.id} operating run t{t}", short, 0)

    flex = inst.flex
    for s in range(S):
        Pu = sched.PM[:, :, s] + agg
        PM = sched.PM[:, :, s]
        for t in range(T):
            for k in range(K):
                where = f"t{t + 1} k{k + 1} s{s}"
                if flex.delta1 is not None and k > 0 and _flex_binds(inst, scen, s, (t, k), (t, k - 1)):
                    chk.at_most("utility-ramp", where + " intra", abs(Pu[t, k] - Pu[t, k - 1]), flex.delta1)
                    if env is not None and env.intra_low is not None:
                        step = PM[t, k] - PM[t, k - 1]
                        chk.at_most("flexibility", where + " intra low", env.intra_low[t, k], step)
                        chk.at_most("flexibility", where + " intra up", step, env.intra_up[t, k])
            if flex.delta2 is None:
                continue
            if t > 0 and _flex_binds(inst, scen, s, (t, 0), (t - 1, K - 1)):
                where = f"t{t + 1} k1 s{s}"
                chk.at_most("utility-ramp", where + " inter", abs(Pu[t, 0] - Pu[t - 1, K - 1]), flex.delta2)
                if env is not None and env.inter_low is not None:
                    step = PM[t, 0] - PM[t - 1, K - 1]
                    chk.at_most("flexibility", where + " inter low", env.inter_low[t], step)
                    chk.at_most("flexibility", where + " inter up", step, env.inter_up[t])
            if t == 0 and inst.previous_utility_power is not None and _flex_binds(inst, scen, s, (0, 0), (0, 0)):
                where = f"t1 k1 s{s}"
                chk.at_most("utility-ramp", where + " initial",
                            abs(Pu[0, 0] - inst.previous_utility_power), flex.delta2)
                if env is not None and env.initial_low is not None:
                    chk.at_most("flexibility", where + " initial low", env.initial_low, PM[0, 0])
                    chk.at_most("flexibility", where + " initial up", PM[0, 0], env.initial_up)
    return chk.report


# ---------------------------------------------------------------------------
# brute force


@dataclass
class BruteForceResult:
    status: str  # "optimal" | "infeasible"
    objective: float
    assignments: int
    feasible: int
    best: Optional[dict] = None


def _lp_native(c, A, lo, hi, lb, ub):
    out = dual_simplex(c, A, lo, hi, lb, ub)
    if out.status not in ("optimal", "infeasible"):
        raise RuntimeError(f"oracle LP ended with status {out.status}: {out.message}")
    return (out.objective, out.x) if out.status == "optimal" else (None, None)


def _lp_highs(c, A, lo, hi, lb, ub):
    from scipy.optimize import linprog

    le = np.isfinite(hi)
    ge = np.isfinite(lo)
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([hi[le], -lo[ge]])
    res = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  bounds=list(zip(lb, ub)), method="highs")
    if res.status == 2:
        return None, None
    if res.status != 0:
        raise RuntimeError(f"oracle LP failed: {res.message}")
    return res.fun, res.x


LP_SOLVERS = {"native": _lp_native, "highs": _lp_highs}


class _DenseLP:
    """Tiny helper that collects named columns and two-sided rows."""

    def __init__(self):
        self.cols: dict = {}
        self.lb: list = []
        self.ub: list = []
        self.c: list = []
        self.rows: list = []

    def var(self, key, lo, hi, cost=0.0):
        self.cols[key] = len(self.lb)
        self.lb.append(lo)
        self.ub.append(hi)
        self.c.append(cost)
        return key

    def row(self, terms, lo, hi):
        self.rows.append((terms, lo, hi))

    def arrays(self):
        n = len(self.lb)
        A = np.zeros((len(self.rows), n))
        lo = np.empty(len(self.rows))
        hi = np.empty(len(self.rows))
        for i, (terms, a, b) in enumerate(self.rows):
            for key, coef in terms:
                A[i, self.cols[key]] += coef
            lo[i], hi[i] = a, b
        return np.array(self.c), A, lo, hi, np.array(self.lb, float), np.array(self.ub, float)


def _presolve(c, A, lo, hi, lb, ub, tol=1e-9):
    """Fold singleton rows into bounds and fixed columns into row bounds.

    Returns the reduced problem plus the objective constant, or None when a
    contradiction shows up on the way.
    """
    offset = 0.0
    rows = np.ones(A.shape[0], dtype=bool)
    cols = np.ones(A.shape[1], dtype=bool)
    lo, hi, lb, ub = lo.copy(), hi.copy(), lb.copy(), ub.copy()
    changed = True
    while changed:
        changed = False
        for i in np.flatnonzero(rows):
            nz = np.flatnonzero((A[i] != 0) & cols)
            if nz.size > 1:
                continue
            rows[i] = False
            changed = True
            if nz.size == 0:
                if lo[i] > tol or hi[i] < -tol:
                    return None
                continue
            j = nz[0]
            a = A[i, j]
            new_lo, new_hi = (lo[i] / a, hi[i] / a) if a > 0 else (hi[i] / a, lo[i] / a)
            lb[j], ub[j] = max(lb[j], new_lo), min(ub[j], new_hi)
            if lb[j] > ub[j] + tol * (1 + abs(lb[j])):
                return None
            ub[j] = max(ub[j], lb[j])
        fixed = np.isfinite(lb) & np.isfinite(ub) & (ub - lb <= tol * (1 + np.abs(lb)))
        for j in np.flatnonzero(cols & fixed):
            v = lb[j]
            offset += c[j] * v
            lo -= A[:, j] * v
            hi -= A[:, j] * v
            cols[j] = False
            changed = True
    keep = cols
    return c[keep], A[np.ix_(rows, keep)], lo[rows], hi[rows], lb[keep], ub[keep], offset


def _binary_layout(inst):
    T = inst.grid.T
    slots = []
    for g in inst.units:
        slots += [("I", g.id, t) for t in range(1, T + 1)]
    for b in inst.storages:
        slots += [("u", b.id, t) for t in range(1, T + 1)]
        slots += [("v", b.id, t) for t in range(1, T + 1)]
    for d in inst.adjustable:
        slots += [("z", d.id, t) for t in range(d.alpha, d.beta + 1)]
    return slots


def _forced(inst):
    """Binary values pinned by commitment history."""
    out = {}
    T = inst.grid.T
    for g in inst.units:
        h = g.initial_status
        if h is not None and h > 0:
            out.update({("I", g.id, t): 1 for t in range(1, min(T, g.UT - h) + 1)})
        elif h is not None and h < 0:
            out.update({("I", g.id, t): 0 for t in range(1, min(T, g.DT + h) + 1)})
    return out


def _assignment_ok(inst, a) -> bool:
    T = inst.grid.T
    for g in inst.units:
        seq = [a[("I", g.id, t)] for t in range(1, T + 1)]
        before = 1 if g.initially_on else 0
        if _run_breaches(seq, before, g.UT, 1) or _run_breaches(seq, before, g.DT, 0):
            return False
    for b in inst.storages:
        u = [a[("u", b.id, t)] for t in range(1, T + 1)]
        v = [a[("v", b.id, t)] for t in range(1, T + 1)]
        if any(x + y > 1 for x, y in zip(u, v)):
            return False
        if _run_breaches(u, 0, b.MD, 1) or _run_breaches(v, 0, b.MC, 1):
            return False
    for d in inst.adjustable:
        z = [a.get(("z", d.id, t), 0) for t in range(1, T + 1)]
        if _run_breaches(z, 0, d.MU, 1, last=d.beta):
            return False
    return True


def _fixed_cost(inst, a) -> float:
    T = inst.grid.T
    total = 0.0
    for g in inst.units:
        prev = 1 if g.initially_on else 0
        for t in range(1, T + 1):
            cur = a[("I", g.id, t)]
            total += g.su_cost * max(cur - prev, 0) + g.sd_cost * max(prev - cur, 0)
            prev = cur
    return total


def _assignment_lp(inst, scen, delta1, delta2, a) -> _DenseLP:
    T, K, S = inst.grid.T, inst.grid.K, scen.S
    tau = 1.0 / K
    fixed = _series(inst, "fixed-load")
    nondisp = _series(inst, "nondispatchable-generation")
    agg = _agg(inst)
    rho = np.asarray(inst.prices.rho, dtype=float)
    lp = _DenseLP()
    inf = np.inf

    for d in inst.adjustable:
        for t in range(1, T + 1):
            on = a.get(("z", d.id, t), 0)
            for k in range(1, K + 1):
                lp.var(("D", d.id, t, k), d.Dmin * on, d.Dmax * on)
        lp.row([(("D", d.id, t, k), tau) for t in range(1, T + 1) for k in range(1, K + 1)], d.E, d.E)

    for s in range(S):
        for t in range(1, T + 1):
            for k in range(1, K + 1):
                cap = inst.PMmax * scen.w[t - 1, k - 1, s]
                lp.var(("PM", t, k, s), -cap, cap, tau * rho[t - 1] if s == 0 else 0.0)
                loads = [d for d in inst.adjustable if d.alpha <= t <= d.beta]
                ls_cap = inf if inst.curtailment_allowed else 0.0
                lp.var(("LS", t, k, s), 0.0, ls_cap, tau * scen.psi[s] * inst.voll)
                if inst.curtailment_allowed:
                    lp.row([(("LS", t, k, s), 1.0)] + [(("D", d.id, t, k), -1.0) for d in loads],
                           -inf, fixed[t - 1, k - 1])
                terms = [(("PM", t, k, s), 1.0), (("LS", t, k, s), 1.0)]
                terms += [(("D", d.id, t, k), -1.0) for d in loads]
                for g in inst.units:
                    on = a[("I", g.id, t)]
                    lp.var(("P", g.id, t, k, s), g.Pmin * on, g.Pmax * on)
                    terms.append((("P", g.id, t, k, s), 1.0))
                for b in inst.storages:
                    lp.var(("Pd", b.id, t, k, s), b.Pdch_min * a[("u", b.id, t)], b.Pdch_max * a[("u", b.id, t)])
                    lp.var(("Pc", b.id, t, k, s), b.Pch_min * a[("v", b.id, t)], b.Pch_max * a[("v", b.id, t)])
                    lp.var(("C", b.id, t, k, s), b.Cmin, b.Cmax)
                    terms += [(("Pd", b.id, t, k, s), 1.0), (("Pc", b.id, t, k, s), -1.0)]
                rhs = fixed[t - 1, k - 1] - nondisp[t - 1, k - 1]
                lp.row(terms, rhs, rhs)

        # sequential constraints over the flattened sub-period order
        order = [(t, k) for t in range(1, T + 1) for k in range(1, K + 1)]
        for i, (t, k) in enumerate(order):
            prev = order[i - 1] if i else None
            for g in inst.units:
                P = ("P", g.id, t, k, s)
                if prev is not None:
                    P0 = ("P", g.id, prev[0], prev[1], s)
                    lp.row([(P, 1.0), (P0, -1.0)], -g.DR, g.UR)
                elif g.initially_on:
                    lp.row([(P, 1.0)], g.initial_power - g.DR, g.initial_power + g.UR)
            for b in inst.storages:
                terms = [(("C", b.id, t, k, s), 1.0), (("Pd", b.id, t, k, s), tau / b.eta),
                         (("Pc", b.id, t, k, s), -tau)]
                if prev is None:
                    lp.row(terms, b.C0, b.C0)
                else:
                    terms.append((("C", b.id, prev[0], prev[1], s), -1.0))
                    lp.row(terms, 0.0, 0.0)
            if prev is None:
                continue
            both = inst.flex_scope == "all" or (scen.w[t - 1, k - 1, s] and scen.w[prev[0] - 1, prev[1] - 1, s])
            limit = delta1 if k > 1 else delta2
            if limit is not None and both:
                # |PM + agg - (PM' + agg')| <= limit, written on utility power directly
                shift = agg[t - 1, k - 1] - agg[prev[0] - 1, prev[1] - 1]
                lp.row([(("PM", t, k, s), 1.0), (("PM", prev[0], prev[1], s), -1.0)],
                       -limit - shift, limit - shift)
        if delta2 is not None and inst.previous_utility_power is not None and (
                inst.flex_scope == "all" or scen.w[0, 0, s]):
            base = inst.previous_utility_power - agg[0, 0]
            lp.row([(("PM", 1, 1, s), 1.0)], base - delta2, base + delta2)
        for b in inst.storages:
            end = ("C", b.id, T, K, s)
            if b.terminal_policy == "at-least-initial":
                lp.row([(end, 1.0)], b.C0, inf)
            elif b.terminal_policy == "equal-initial":
                lp.row([(end, 1.0)], b.C0, b.C0)

    # generation cost epigraph on scenario 0: y >= f(p_j) + slope_j (P - p_j)
    for g in inst.units:
        pts, vals = np.asarray(g.cost.power, float), np.asarray(g.cost.cost, float)
        slopes = np.diff(vals) / np.diff(pts)
        for t in range(1, T + 1):
            on = a[("I", g.id, t)]
            for k in range(1, K + 1):
                y = lp.var(("y", g.id, t, k), -inf if on else 0.0, inf if on else 0.0, tau)
                if not on:
                    continue
                for j, slope in enumerate(slopes):
                    lp.row([(y, 1.0), (("P", g.id, t, k, 0), -slope)], vals[j] - slope * pts[j], inf)
    return lp


def brute_force_optimum(inst: MicrogridInstance, scen: ScenarioSet, env: Optional[FlexibilityEnvelope],
                        lp_solver="native", max_binaries: int = 20) -> BruteForceResult:
    """Minimum cost over all binary assignments, one continuous LP each.

    Ramp limits are applied to the reconstructed utility power with the raw
    operator limits taken from ``env`` (no envelope bounds are used).
    Assignments that break a pure-binary rule (exclusivity, minimum run
    lengths, commitment history) are skipped without an LP.
    """
    slots = _binary_layout(inst)
    if len(slots) > max_binaries:
        raise ValueError(f"instance has {len(slots)} binaries; brute force is limited to {max_binaries}")
    solve = LP_SOLVERS[lp_solver] if isinstance(lp_solver, str) else lp_solver
    delta1 = env.delta1 if env is not None else None
    delta2 = env.delta2 if env is not None else None
    forced = _forced(inst)
    free = [slot for slot in slots if slot not in forced]
    best, best_a, tried, feasible = np.inf, None, 0, 0
    for bits in itertools.product((0, 1), repeat=len(free)):
        a = dict(forced)
        a.update(zip(free, bits))
        tried += 1
        if not _assignment_ok(inst, a):
            continue
        reduced = _presolve(*_assignment_lp(inst, scen, delta1, delta2, a).arrays())
        if reduced is None:
            continue
        *problem, offset = reduced
        obj, _ = solve(*problem)
        if obj is None:
            continue
        obj += offset
        feasible += 1
        total = obj + _fixed_cost(inst, a)
        if total < best:
            best, best_a = total, a
    if best_a is None:
        return BruteForceResult("infeasible", np.nan, tried, 0)
    return BruteForceResult("optimal", float(best), tried, feasible, best_a)
