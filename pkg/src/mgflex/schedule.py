"""Typed schedules pulled out of solver column values."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import MicrogridInstance
from .model import VariableIndex, VarKey
from .scenarios import ScenarioSet


@dataclass
class CostBreakdown:
    generation: float
    energy: float
    curtailment: float
    startup_shutdown: float = 0.0

    @property
    def total(self) -> float:
        return self.generation + self.energy + self.curtailment + self.startup_shutdown


@dataclass
class Schedule:
    """Dispatch per component; arrays are (T, K, S) for per-scenario values,
    (T, K) for scenario-free loads and (T,) for hourly binaries."""

    P: dict[str, np.ndarray]
    I: dict[str, np.ndarray]
    Pdch: dict[str, np.ndarray]
    Pch: dict[str, np.ndarray]
    C: dict[str, np.ndarray]
    u: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    D: dict[str, np.ndarray]
    z: dict[str, np.ndarray]
    PM: np.ndarray
    LS: np.ndarray
    objective: Optional[float] = None
    costs: Optional[CostBreakdown] = None
    meta: dict = field(default_factory=dict)

    def storage_power(self, sid: str) -> np.ndarray:
        return self.Pdch[sid] - self.Pch[sid]

    def to_dict(self) -> dict:
        def conv(d):
            return {k: np.asarray(v).tolist() for k, v in d.items()}

        out = {name: conv(getattr(self, name)) for name in ("P", "I", "Pdch", "Pch", "C", "u", "v", "D", "z")}
        out["PM"] = self.PM.tolist()
        out["LS"] = self.LS.tolist()
        out["objective"] = self.objective
        out["costs"] = None if self.costs is None else {
            "generation": self.costs.generation, "energy": self.costs.energy,
            "curtailment": self.costs.curtailment, "startup_shutdown": self.costs.startup_shutdown,
            "total": self.costs.total}
        out["meta"] = self.meta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Schedule":
        def conv(d):
            return {k: np.asarray(v, dtype=float) for k, v in d.items()}

        costs = data.get("costs")
        return cls(
            **{name: conv(data[name]) for name in ("P", "I", "Pdch", "Pch", "C", "u", "v", "D", "z")},
            PM=np.asarray(data["PM"], dtype=float), LS=np.asarray(data["LS"], dtype=float),
            objective=data.get("objective"),
            costs=None if costs is None else CostBreakdown(costs["generation"], costs["energy"],
                                                           costs["curtailment"], costs.get("startup_shutdown", 0.0)),
            meta=data.get("meta", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Schedule":
        return cls.from_dict(json.loads(Path(path).read_text()))


class IndexDesyncError(RuntimeError):
    """The variable index does not describe the solved column vector."""


def cost_breakdown(inst: MicrogridInstance, scen: ScenarioSet, sched: Schedule) -> CostBreakdown:
    """Recompute the operating cost from schedule values and raw instance data."""
    T, K = inst.grid.T, inst.grid.K
    tau = 1.0 / K
    gen = 0.0
    sus = 0.0
    for g in inst.units:
        on = np.round(sched.I[g.id]).astype(bool)
        for t in range(T):
            if on[t]:
                gen += tau * float(np.sum(g.cost(sched.P[g.id][t, :, 0])))
        prev = 1 if g.initially_on else 0
        for t in range(T):
            cur = int(on[t])
            sus += g.su_cost * max(cur - prev, 0) + g.sd_cost * max(prev - cur, 0)
            prev = cur
    rho = np.asarray(inst.prices.rho)
    energy = float(tau * np.sum(rho[:, None] * sched.PM[:, :, 0]))
    curtail = float(tau * inst.voll * np.sum(sched.LS * scen.psi[None, None, :]))
    return CostBreakdown(gen, energy, curtail, sus)


def extract_schedule(result, vi: VariableIndex, inst: MicrogridInstance, scen: ScenarioSet) -> Schedule:
    """Map solver column values back to coordinates and recompute the cost."""
    x = result.x
    if x is None:
        raise ValueError(f"result has no column values (status {result.status})")
    if len(x) != len(vi):
        raise IndexDesyncError(f"{len(x)} values for {len(vi)} indexed columns")
    T, K, S = inst.grid.T, inst.grid.K, scen.S

    def grab(symbol, owner, shape, scenario=True, hours=None):
        arr = np.zeros(shape)
        for t in hours or range(1, T + 1):
            if len(shape) == 1:
                arr[t - 1] = x[_col(vi, VarKey(symbol, owner, t))]
                continue
            for k in range(1, K + 1):
                if scenario:
                    for s in range(S):
                        arr[t - 1, k - 1, s] = x[_col(vi, VarKey(symbol, owner, t, k, s))]
                else:
                    arr[t - 1, k - 1] = x[_col(vi, VarKey(symbol, owner, t, k))]
        return arr

    sched = Schedule(
        P={g.id: grab("P", g.id, (T, K, S)) for g in inst.units},
        I={g.id: np.round(grab("I", g.id, (T,))) for g in inst.units},
        Pdch={b.id: grab("Pdch", b.id, (T, K, S)) for b in inst.storages},
        Pch={b.id: grab("Pch", b.id, (T, K, S)) for b in inst.storages},
        C={b.id: grab("C", b.id, (T, K, S)) for b in inst.storages},
        u={b.id: np.round(grab("u", b.id, (T,))) for b in inst.storages},
        v={b.id: np.round(grab("v", b.id, (T,))) for b in inst.storages},
        D={d.id: grab("D", d.id, (T, K), scenario=False, hours=list(range(d.alpha, d.beta + 1)))
           for d in inst.adjustable},
        z={d.id: np.round(grab("z", d.id, (T,), hours=list(range(d.alpha, d.beta + 1)))) for d in inst.adjustable},
        PM=grab("PM", "", (T, K, S)),
        LS=grab("LS", "", (T, K, S)),
        objective=float(result.objective),
        meta={"status": result.status, "bound": float(result.bound), "nodes": result.nodes,
              "psi": scen.psi.tolist()},
    )
    sched.costs = cost_breakdown(inst, scen, sched)
    return sched


def _col(vi: VariableIndex, key: VarKey) -> int:
    j = vi.get(key)
    if j is None:
        raise IndexDesyncError(f"no column for {key}")
    return j
