"""Assemble the scheduling MILP from a validated instance.

Storage power is split into nonnegative discharge/charge parts gated by the
hourly mode binaries, which keeps the state-of-charge update linear. Minimum
up/down, charge/discharge and operating times are written as window sums
over the hourly binaries instead of explicit counter variables.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .core import MicrogridInstance
from .envelope import FlexibilityEnvelope
from .model import BINARY_SYMBOLS, MilpModel, VariableIndex, VarKey, coord_name
from .scenarios import ScenarioSet

log = logging.getLogger(__name__)

# row family -> constraint group, used for infeasibility hints and reports
ROW_FAMILIES = {
    "balance": "balance",
    "ls_cap": "balance",
    "flex_intra": "flexibility",
    "flex_inter": "flexibility",
    "flex_initial": "flexibility",
    "cap_max": "capacity",
    "cap_min": "capacity",
    "ramp_up": "ramp",
    "ramp_dn": "ramp",
    "min_up": "updown",
    "min_down": "updown",
    "startup": "updown",
    "shutdown": "updown",
    "cost_link": "cost",
    "dch_max": "storage",
    "dch_min": "storage",
    "ch_max": "storage",
    "ch_min": "storage",
    "excl": "storage",
    "soc": "storage",
    "min_dch": "storage",
    "min_ch": "storage",
    "terminal": "storage",
    "adj_max": "adjustable",
    "adj_min": "adjustable",
    "adj_minup": "adjustable",
    "adj_energy": "adjustable",
}


@dataclass
class Row:
    family: str
    name: str
    coefs: dict  # VarKey -> float
    sense: str
    rhs: float


def _row(family, owner, t, k, s, terms, sense, rhs) -> Row:
    coefs: dict = {}
    for key, val in terms:
        coefs[key] = coefs.get(key, 0.0) + val
    coefs = {key: v for key, v in coefs.items() if v != 0.0}
    return Row(family, coord_name(family, owner, t, k, s), coefs, sense, float(rhs))


def commitment_carryover(unit, T: int) -> dict[int, int]:
    """Hours (1-based) whose commitment is forced by the pre-horizon history."""
    h = unit.initial_status
    if h is None:
        return {}
    if h > 0:
        return {t: 1 for t in range(1, min(T, unit.UT - h) + 1)}
    return {t: 0 for t in range(1, min(T, unit.DT + h) + 1)}


def ls_upper(inst: MicrogridInstance, t: int, k: int) -> float:
    """Curtailment column bound: fixed load plus the largest adjustable draw."""
    if not inst.curtailment_allowed:
        return 0.0
    total = inst.fixed_load[t - 1, k - 1]
    total += sum(d.Dmax for d in inst.adjustable if inst.load_active(d, t))
    return float(total)


def declare_columns(inst: MicrogridInstance, scen: ScenarioSet) -> tuple[VariableIndex, np.ndarray, np.ndarray]:
    """Create every column; returns the index (sorted) and its bounds."""
    T, K, S = inst.grid.T, inst.grid.K, scen.S
    bounds: dict[VarKey, tuple[float, float]] = {}
    hours = range(1, T + 1)
    subs = range(1, K + 1)
    scens = range(S)

    for g in inst.units:
        forced = commitment_carryover(g, T)
        for t in hours:
            lo_hi = (forced[t], forced[t]) if t in forced else (0.0, 1.0)
            bounds[VarKey("I", g.id, t)] = lo_hi
            if g.su_cost > 0:
                bounds[VarKey("SUvar", g.id, t)] = (0.0, 1.0)
            if g.sd_cost > 0:
                bounds[VarKey("SDvar", g.id, t)] = (0.0, 1.0)
            for k in subs:
                for s in scens:
                    bounds[VarKey("P", g.id, t, k, s)] = (0.0, g.Pmax)
                if g.cost.n_segments > 1:
                    widths = np.diff(g.cost.power)
                    for j, wdt in enumerate(widths):
                        bounds[VarKey("seg", f"{g.id}#{j}", t, k)] = (0.0, float(wdt))
    for b in inst.storages:
        for t in hours:
            bounds[VarKey("u", b.id, t)] = (0.0, 1.0)
            bounds[VarKey("v", b.id, t)] = (0.0, 1.0)
            for k in subs:
                for s in scens:
                    bounds[VarKey("Pdch", b.id, t, k, s)] = (0.0, b.Pdch_max)
                    bounds[VarKey("Pch", b.id, t, k, s)] = (0.0, b.Pch_max)
                    bounds[VarKey("C", b.id, t, k, s)] = (b.Cmin, b.Cmax)
    for d in inst.adjustable:
        for t in range(d.alpha, d.beta + 1):
            bounds[VarKey("z", d.id, t)] = (0.0, 1.0)
            for k in subs:
                bounds[VarKey("D", d.id, t, k)] = (0.0, d.Dmax)
    for t in hours:
        for k in subs:
            ls_ub = ls_upper(inst, t, k)
            for s in scens:
                cap = inst.PMmax * scen.w[t - 1, k - 1, s]
                bounds[VarKey("PM", "", t, k, s)] = (-cap, cap)
                bounds[VarKey("LS", "", t, k, s)] = (0.0, ls_ub)

    keys = sorted(bounds, key=VarKey.sort_key)
    vi = VariableIndex(keys)
    lb = np.array([bounds[key][0] for key in keys], dtype=float)
    ub = np.array([bounds[key][1] for key in keys], dtype=float)
    return vi, lb, ub


def build_objective(inst: MicrogridInstance, scen: ScenarioSet, vi: VariableIndex) -> np.ndarray:
    T, K = inst.grid.T, inst.grid.K
    rho = np.asarray(inst.prices.rho, dtype=float)
    if rho.size != T or not np.all(np.isfinite(rho)):
        raise ValueError(f"need a finite market price for each of the {T} hours")
    tau = 1.0 / K
    c = np.zeros(len(vi))

    def add(key, val):
        c[vi.col(key)] += val

    for g in inst.units:
        f = g.cost
        slopes = f.slopes
        p0, f0 = f.power[0], f.cost[0]
        for t in range(1, T + 1):
            if f.n_segments == 1:
                add(VarKey("I", g.id, t), f0 - slopes[0] * p0)
            else:
                add(VarKey("I", g.id, t), f0)
            if g.su_cost > 0:
                add(VarKey("SUvar", g.id, t), g.su_cost)
            if g.sd_cost > 0:
                add(VarKey("SDvar", g.id, t), g.sd_cost)
            for k in range(1, K + 1):
                if f.n_segments == 1:
                    add(VarKey("P", g.id, t, k, 0), tau * slopes[0])
                else:
                    for j, slope in enumerate(slopes):
                        add(VarKey("seg", f"{g.id}#{j}", t, k), tau * slope)
    for t in range(1, T + 1):
        for k in range(1, K + 1):
            add(VarKey("PM", "", t, k, 0), tau * rho[t - 1])
            for s in range(scen.S):
                add(VarKey("LS", "", t, k, s), tau * scen.psi[s] * inst.voll)
    return c


def build_balance(inst: MicrogridInstance, scen: ScenarioSet, vi: VariableIndex) -> list[Row]:
    T, K = inst.grid.T, inst.grid.K
    net = inst.fixed_load - inst.nondispatchable
    rows = []
    for s in range(scen.S):
        for t in range(1, T + 1):
            loads = [d for d in inst.adjustable if inst.load_active(d, t)]
            for k in range(1, K + 1):
                terms = [(VarKey("P", g.id, t, k, s), 1.0) for g in inst.units]
                for b in inst.storages:
                    terms += [(VarKey("Pdch", b.id, t, k, s), 1.0), (VarKey("Pch", b.id, t, k, s), -1.0)]
                terms += [(VarKey("PM", "", t, k, s), 1.0), (VarKey("LS", "", t, k, s), 1.0)]
                terms += [(VarKey("D", d.id, t, k), -1.0) for d in loads]
                rows.append(_row("balance", "", t, k, s, terms, "E", net[t - 1, k - 1]))
                if loads and inst.curtailment_allowed:
                    cap = [(VarKey("LS", "", t, k, s), 1.0)] + [(VarKey("D", d.id, t, k), -1.0) for d in loads]
                    rows.append(_row("ls_cap", "", t, k, s, cap, "L", inst.fixed_load[t - 1, k - 1]))
    return rows


def _flex_applies(inst, scen, s, a, b) -> bool:
    """Whether a flexibility row linking sub-periods ``a`` and ``b`` binds in scenario ``s``."""
    if inst.flex_scope == "all":
        return True
    return bool(scen.w[a[0] - 1, a[1] - 1, s] and scen.w[b[0] - 1, b[1] - 1, s])


def _range_rows(family, t, k, s, terms, low, up) -> list[Row]:
    if low == up:
        return [_row(family, "", t, k, s, terms, "E", low)]
    out = [_row(family, "", t, k, s, terms, "G", low), _row(family, "", t, k, s, terms, "L", up)]
    out[0].name += "_lo"
    out[1].name += "_up"
    return out


def build_grid_exchange(inst: MicrogridInstance, scen: ScenarioSet, env: Optional[FlexibilityEnvelope],
                        vi: VariableIndex) -> list[Row]:
    """Flexibility rows on PM steps. The exchange cap itself lives in the PM column bounds."""
    if env is None:
        return []
    T, K = inst.grid.T, inst.grid.K
    rows = []
    for s in range(scen.S):
        if env.initial_low is not None and _flex_applies(inst, scen, s, (1, 1), (1, 1)):
            rows += _range_rows("flex_initial", 1, 1, s, [(VarKey("PM", "", 1, 1, s), 1.0)],
                                env.initial_low, env.initial_up)
        for t in range(1, T + 1):
            if env.inter_low is not None and t > 1 and _flex_applies(inst, scen, s, (t, 1), (t - 1, K)):
                terms = [(VarKey("PM", "", t, 1, s), 1.0), (VarKey("PM", "", t - 1, K, s), -1.0)]
                rows += _range_rows("flex_inter", t, 1, s, terms, env.inter_low[t - 1], env.inter_up[t - 1])
            if env.intra_low is None:
                continue
            for k in range(2, K + 1):
                if _flex_applies(inst, scen, s, (t, k), (t, k - 1)):
                    terms = [(VarKey("PM", "", t, k, s), 1.0), (VarKey("PM", "", t, k - 1, s), -1.0)]
                    rows += _range_rows("flex_intra", t, k, s, terms,
                                        env.intra_low[t - 1, k - 1], env.intra_up[t - 1, k - 1])
    return rows


def _window_rows(family, owner, key_of, T, need, initial, last=None, kind="up") -> list[Row]:
    """Minimum-duration rows over hourly binaries ``x_t = key_of(t)``.

    ``kind="up"``: once ``x`` switches on at ``t`` it stays on for
    ``min(need, T - t + 1)`` hours. ``kind="down"`` mirrors this for staying
    off. ``initial`` is the (constant) state before the first hour and
    ``last`` caps the hours where the binary exists (beyond it ``x = 0``).
    """
    rows = []
    first = min(t for t in range(1, T + 1) if key_of(t) is not None)
    last = last or T
    for t in range(first, last + 1):
        L = min(need, T - t + 1)
        if L <= 1:
            continue
        window = [key_of(tt) for tt in range(t, t + L) if tt <= last]
        prev = key_of(t - 1) if t > first else None
        prev_const = initial if t == first else 0.0
        if kind == "up":
            # sum(window) - L x_t + L x_{t-1} >= 0
            terms = [(key, 1.0) for key in window] + [(key_of(t), -L)]
            rhs = 0.0
            if prev is not None:
                terms.append((prev, L))
            else:
                rhs = -L * prev_const
            rows.append(_row(family, owner, t, None, None, terms, "G", rhs))
        else:
            # sum(window) - L x_t + L x_{t-1} <= L
            terms = [(key, 1.0) for key in window] + [(key_of(t), -L)]
            rhs = float(L)
            if prev is not None:
                terms.append((prev, L))
            else:
                rhs -= L * prev_const
            rows.append(_row(family, owner, t, None, None, terms, "L", rhs))
    return rows


def build_dispatchable(inst: MicrogridInstance, scen: ScenarioSet, vi: VariableIndex) -> list[Row]:
    T, K = inst.grid.T, inst.grid.K
    rows = []
    for g in inst.units:
        I0 = 1.0 if g.initially_on else 0.0
        for s in range(scen.S):
            for t in range(1, T + 1):
                I = VarKey("I", g.id, t)
                for k in range(1, K + 1):
                    P = VarKey("P", g.id, t, k, s)
                    rows.append(_row("cap_max", g.id, t, k, s, [(P, 1.0), (I, -g.Pmax)], "L", 0.0))
                    if g.Pmin > 0:
                        rows.append(_row("cap_min", g.id, t, k, s, [(P, 1.0), (I, -g.Pmin)], "G", 0.0))
                    if k > 1:
                        prev = VarKey("P", g.id, t, k - 1, s)
                    elif t > 1:
                        prev = VarKey("P", g.id, t - 1, K, s)
                    else:
                        prev = None
                    if prev is not None:
                        rows.append(_row("ramp_up", g.id, t, k, s, [(P, 1.0), (prev, -1.0)], "L", g.UR))
                        rows.append(_row("ramp_dn", g.id, t, k, s, [(prev, 1.0), (P, -1.0)], "L", g.DR))
                    elif g.initially_on:
                        rows.append(_row("ramp_up", g.id, t, k, s, [(P, 1.0)], "L", g.UR + g.initial_power))
                        rows.append(_row("ramp_dn", g.id, t, k, s, [(P, -1.0)], "L", g.DR - g.initial_power))
        key_of = lambda t, gid=g.id: VarKey("I", gid, t) if 1 <= t <= T else None  # noqa: E731
        rows += _window_rows("min_up", g.id, key_of, T, g.UT, I0, kind="up")
        rows += _window_rows("min_down", g.id, key_of, T, g.DT, I0, kind="down")
        for t in range(1, T + 1):
            I = VarKey("I", g.id, t)
            Iprev = VarKey("I", g.id, t - 1) if t > 1 else None
            if g.su_cost > 0:
                terms = [(VarKey("SUvar", g.id, t), 1.0), (I, -1.0)]
                terms += [(Iprev, 1.0)] if Iprev else []
                rows.append(_row("startup", g.id, t, None, None, terms, "G", 0.0 if Iprev else -I0))
            if g.sd_cost > 0:
                terms = [(VarKey("SDvar", g.id, t), 1.0), (I, 1.0)]
                terms += [(Iprev, -1.0)] if Iprev else []
                rows.append(_row("shutdown", g.id, t, None, None, terms, "G", 0.0 if Iprev else I0))
        if g.cost.n_segments > 1:
            p0 = g.cost.power[0]
            for t in range(1, T + 1):
                for k in range(1, K + 1):
                    terms = [(VarKey("P", g.id, t, k, 0), 1.0), (VarKey("I", g.id, t), -p0)]
                    terms += [(VarKey("seg", f"{g.id}#{j}", t, k), -1.0) for j in range(g.cost.n_segments)]
                    rows.append(_row("cost_link", g.id, t, k, None, terms, "E", 0.0))
    return rows


def build_storage(inst: MicrogridInstance, scen: ScenarioSet, vi: VariableIndex) -> list[Row]:
    T, K = inst.grid.T, inst.grid.K
    tau = 1.0 / K
    rows = []
    for b in inst.storages:
        for t in range(1, T + 1):
            u, v = VarKey("u", b.id, t), VarKey("v", b.id, t)
            rows.append(_row("excl", b.id, t, None, None, [(u, 1.0), (v, 1.0)], "L", 1.0))
            for k in range(1, K + 1):
                for s in range(scen.S):
                    dch, ch = VarKey("Pdch", b.id, t, k, s), VarKey("Pch", b.id, t, k, s)
                    rows.append(_row("dch_max", b.id, t, k, s, [(dch, 1.0), (u, -b.Pdch_max)], "L", 0.0))
                    if b.Pdch_min > 0:
                        rows.append(_row("dch_min", b.id, t, k, s, [(dch, 1.0), (u, -b.Pdch_min)], "G", 0.0))
                    rows.append(_row("ch_max", b.id, t, k, s, [(ch, 1.0), (v, -b.Pch_max)], "L", 0.0))
                    if b.Pch_min > 0:
                        rows.append(_row("ch_min", b.id, t, k, s, [(ch, 1.0), (v, -b.Pch_min)], "G", 0.0))
                    C = VarKey("C", b.id, t, k, s)
                    terms = [(C, 1.0), (dch, tau / b.eta), (ch, -tau)]
                    if t == 1 and k == 1:
                        rhs = b.C0
                    else:
                        pt, pk = (t, k - 1) if k > 1 else (t - 1, K)
                        terms.append((VarKey("C", b.id, pt, pk, s), -1.0))
                        rhs = 0.0
                    rows.append(_row("soc", b.id, t, k, s, terms, "E", rhs))
        rows += _window_rows("min_dch", b.id, lambda t, i=b.id: VarKey("u", i, t) if 1 <= t <= T else None,
                             T, b.MD, 0.0, kind="up")
        rows += _window_rows("min_ch", b.id, lambda t, i=b.id: VarKey("v", i, t) if 1 <= t <= T else None,
                             T, b.MC, 0.0, kind="up")
        if b.terminal_policy != "none":
            sense = "G" if b.terminal_policy == "at-least-initial" else "E"
            for s in range(scen.S):
                rows.append(_row("terminal", b.id, T, K, s, [(VarKey("C", b.id, T, K, s), 1.0)], sense, b.C0))
    return rows


def build_adjustable(inst: MicrogridInstance, scen: ScenarioSet, vi: VariableIndex) -> list[Row]:
    T, K = inst.grid.T, inst.grid.K
    tau = 1.0 / K
    rows = []
    for d in inst.adjustable:
        for t in range(d.alpha, d.beta + 1):
            z = VarKey("z", d.id, t)
            for k in range(1, K + 1):
                D = VarKey("D", d.id, t, k)
                rows.append(_row("adj_max", d.id, t, k, None, [(D, 1.0), (z, -d.Dmax)], "L", 0.0))
                if d.Dmin > 0:
                    rows.append(_row("adj_min", d.id, t, k, None, [(D, 1.0), (z, -d.Dmin)], "G", 0.0))
        key_of = lambda t, i=d.id, a=d.alpha, b=d.beta: VarKey("z", i, t) if a <= t <= b else None  # noqa: E731
        rows += _window_rows("adj_minup", d.id, key_of, T, d.MU, 0.0, last=d.beta, kind="up")
        terms = [(VarKey("D", d.id, t, k), tau) for t in range(d.alpha, d.beta + 1) for k in range(1, K + 1)]
        rows.append(_row("adj_energy", d.id, None, None, None, terms, "E", d.E))
    return rows


def assemble(inst: MicrogridInstance, env: Optional[FlexibilityEnvelope], scen: ScenarioSet) -> tuple[MilpModel, VariableIndex]:
    """Build the full model with deterministic column and row order."""
    if not inst.validated:
        raise ValueError("instance must be validated before assembly")
    vi, lb, ub = declare_columns(inst, scen)
    c = build_objective(inst, scen, vi)
    rows = build_balance(inst, scen, vi)
    rows += build_grid_exchange(inst, scen, env, vi)
    rows += build_dispatchable(inst, scen, vi)
    rows += build_storage(inst, scen, vi)
    rows += build_adjustable(inst, scen, vi)
    for r in rows:
        if not r.coefs:
            ok = {"L": 0 <= r.rhs, "G": 0 >= r.rhs, "E": r.rhs == 0}[r.sense]
            if not ok:
                raise ValueError(f"row {r.name} has no variables and cannot be satisfied")
    rows = [r for r in rows if r.coefs]

    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for r in rows:
        cols = sorted((vi.col(key), val) for key, val in r.coefs.items())
        indices.extend(j for j, _ in cols)
        data.extend(v for _, v in cols)
        indptr.append(len(indices))
    A = sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64),
                       np.array(indptr, dtype=np.int64)), shape=(len(rows), len(vi)))
    binary = np.array([key.symbol in BINARY_SYMBOLS for key in vi.keys])
    model = MilpModel(
        c=c, A=A,
        sense=np.array([r.sense for r in rows], dtype="<U1"),
        rhs=np.array([r.rhs for r in rows], dtype=float),
        lb=lb, ub=ub, binary=binary,
        col_names=vi.names, row_names=[r.name for r in rows],
        row_family=[r.family for r in rows],
        name=(inst.name or "MICROGRID")[:8].upper().replace(" ", "_"),
    )
    model.check()
    log.info("assembled model %s", model.stats())
    return model, vi
