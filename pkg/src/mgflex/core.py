"""Domain types for day-ahead microgrid scheduling.

Units: power in MW, energy in MWh, prices in $/MWh, durations in hours.
Hours ``t`` and sub-periods ``k`` are 1-based in files and reports and
0-based in arrays.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

SERIES_KINDS = ("fixed-load", "nondispatchable-generation", "prosumer-net-load")
TERMINAL_POLICIES = ("none", "at-least-initial", "equal-initial")
FLEX_SCOPES = ("connected", "all")


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    T: int
    K: int

    @property
    def tau(self) -> Fraction:
        return Fraction(1, self.K)

    @property
    def theta(self) -> int:
        """Total number of sub-periods in the horizon."""
        return self.T * self.K

    def position(self, t: int, k: int) -> int:
        """1-based global sub-period for 1-based ``(t, k)``."""
        return (t - 1) * self.K + k

    def hour_sub(self, p: int) -> tuple[int, int]:
        """Inverse of :meth:`position`."""
        return (p - 1) // self.K + 1, (p - 1) % self.K + 1


def make_time_grid(T: int, K: int) -> TimeGrid:
    if int(T) != T or int(K) != K or T < 1 or K < 1:
        raise ValueError(f"T and K must be positive integers, got T={T}, K={K}")
    return TimeGrid(int(T), int(K))


@dataclass(frozen=True)
class PiecewiseLinearCost:
    """Convex piecewise-linear cost F(P) in $/h given as (power, cost) breakpoints.

    The cost applies only while the unit is committed; an offline unit costs 0.
    """

    power: tuple[float, ...]
    cost: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "power", tuple(float(p) for p in self.power))
        object.__setattr__(self, "cost", tuple(float(c) for c in self.cost))

    @classmethod
    def linear(cls, marginal: float, pmax: float, no_load: float = 0.0) -> "PiecewiseLinearCost":
        return cls((0.0, pmax), (no_load, no_load + marginal * pmax))

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.cost) / np.diff(self.power)

    @property
    def n_segments(self) -> int:
        return len(self.power) - 1

    def __call__(self, p):
        return np.interp(p, self.power, self.cost)


@dataclass(frozen=True)
class DispatchableUnit:
    id: str
    Pmin: float
    Pmax: float
    UR: float  # MW per sub-period
    DR: float  # MW per sub-period
    UT: int
    DT: int
    cost: PiecewiseLinearCost
    su_cost: float = 0.0
    sd_cost: float = 0.0
    # >0: on for that many hours before the horizon, <0: off; None: off long enough
    initial_status: Optional[int] = None
    initial_power: float = 0.0

    @property
    def initially_on(self) -> bool:
        return self.initial_status is not None and self.initial_status > 0


@dataclass(frozen=True)
class StorageUnit:
    id: str
    Pch_min: float
    Pch_max: float
    Pdch_min: float
    Pdch_max: float
    Cmin: float
    Cmax: float
    C0: float
    eta: float
    MC: int = 1
    MD: int = 1
    terminal_policy: str = "none"


@dataclass(frozen=True)
class AdjustableLoad:
    id: str
    Dmin: float
    Dmax: float
    alpha: int
    beta: int
    E: float
    MU: int = 1


@dataclass(frozen=True)
class FixedSeries:
    """A (T*K,) series in MW, stored hour-major as shape (T, K)."""

    kind: str
    values: np.ndarray
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))


@dataclass(frozen=True)
class MarketPrice:
    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _frozen_array(self.rho))


@dataclass(frozen=True)
class FlexibilitySpec:
    delta1: Optional[float] = None
    delta2: Optional[float] = None

    @property
    def active(self) -> bool:
        return self.delta1 is not None or self.delta2 is not None


@dataclass(frozen=True)
class MicrogridInstance:
    grid: TimeGrid
    units: tuple[DispatchableUnit, ...]
    storages: tuple[StorageUnit, ...]
    adjustable: tuple[AdjustableLoad, ...]
    fixed_series: tuple[FixedSeries, ...]
    prices: MarketPrice
    PMmax: float
    voll: float
    flex: FlexibilitySpec = FlexibilitySpec()
    islanding_k: int = 0
    psi_base: float = 0.9
    scenario_stride: int = 1
    # utility power at the last sub-period of the previous day; enables the t=1 inter-hour row
    previous_utility_power: Optional[float] = None
    curtailment_allowed: bool = True
    flex_scope: str = "connected"
    name: str = ""
    validated: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("units", "storages", "adjustable", "fixed_series"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def with_flex(self, delta1: Optional[float] = None, delta2: Optional[float] = None) -> "MicrogridInstance":
        """Copy with a new flexibility spec; the validated mark is kept when limits are valid."""
        flex = FlexibilitySpec(delta1, delta2)
        out = dataclasses.replace(self, flex=flex, validated=False)
        return validate_instance(out) if self.validated else out

    def with_stride(self, stride: int) -> "MicrogridInstance":
        out = dataclasses.replace(self, scenario_stride=int(stride), validated=False)
        return validate_instance(out) if self.validated else out

    def series(self, kind: str) -> list[FixedSeries]:
        return [s for s in self.fixed_series if s.kind == kind]

    def series_total(self, kind: str) -> np.ndarray:
        """Elementwise sum of all series of ``kind`` as a (T, K) array."""
        total = np.zeros((self.grid.T, self.grid.K))
        for s in self.series(kind):
            total = total + np.asarray(s.values).reshape(self.grid.T, self.grid.K)
        return total

    @property
    def fixed_load(self) -> np.ndarray:
        return self.series_total("fixed-load")

    @property
    def nondispatchable(self) -> np.ndarray:
        return self.series_total("nondispatchable-generation")

    def load_active(self, load: AdjustableLoad, t: int) -> bool:
        """Whether 1-based hour ``t`` lies inside the load's permitted window."""
        return load.alpha <= t <= load.beta


@dataclass(frozen=True)
class Violation:
    type: str
    id: str
    field: str
    message: str

    def __str__(self):
        where = f"{self.id}.{self.field}" if self.id else self.field
        return f"{self.type} {where}: {self.message}"


class InstanceValidationError(ValueError):
    def __init__(self, errors: Sequence[Violation]):
        self.errors = list(errors)
        lines = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"{len(self.errors)} instance violation(s):\n{lines}")


def _check_unit(u: DispatchableUnit, add):
    if not (0 <= u.Pmin <= u.Pmax):
        add("DispatchableUnit", u.id, "Pmin", f"need 0 <= Pmin <= Pmax, got Pmin={u.Pmin}, Pmax={u.Pmax}")
    if u.UR < 0:
        add("DispatchableUnit", u.id, "UR", f"ramp-up limit must be >= 0, got {u.UR}")
    if u.DR < 0:
        add("DispatchableUnit", u.id, "DR", f"ramp-down limit must be >= 0, got {u.DR}")
    if u.UT < 1 or int(u.UT) != u.UT:
        add("DispatchableUnit", u.id, "UT", f"minimum up time must be an integer >= 1, got {u.UT}")
    if u.DT < 1 or int(u.DT) != u.DT:
        add("DispatchableUnit", u.id, "DT", f"minimum down time must be an integer >= 1, got {u.DT}")
    if u.su_cost < 0 or u.sd_cost < 0:
        add("DispatchableUnit", u.id, "su_cost", "startup/shutdown costs must be >= 0")
    if u.initial_status == 0:
        add("DispatchableUnit", u.id, "initial_status", "must be nonzero (signed hours) or absent")
    if u.initially_on and not (u.Pmin <= u.initial_power <= u.Pmax):
        add("DispatchableUnit", u.id, "initial_power", f"committed unit needs Pmin <= P0 <= Pmax, got {u.initial_power}")
    if not u.initially_on and u.initial_power != 0:
        add("DispatchableUnit", u.id, "initial_power", "an offline unit must have initial_power 0")
    f = u.cost
    p = np.asarray(f.power)
    if len(p) < 2 or len(f.cost) != len(p):
        add("DispatchableUnit", u.id, "cost", "need at least two (power, cost) breakpoints")
        return
    if np.any(np.diff(p) <= 0):
        add("DispatchableUnit", u.id, "cost", "breakpoint powers must be strictly increasing")
        return
    if np.any(np.diff(f.slopes) < -1e-12):
        add("DispatchableUnit", u.id, "cost", "cost slopes must be non-decreasing (convex)")
    if p[0] > u.Pmin + 1e-12 or p[-1] < u.Pmax - 1e-12:
        add("DispatchableUnit", u.id, "cost", f"breakpoints must cover [Pmin, Pmax], got [{p[0]}, {p[-1]}]")


def _check_storage(s: StorageUnit, add):
    if not (0 <= s.Pch_min <= s.Pch_max):
        add("StorageUnit", s.id, "Pch_min", f"need 0 <= Pch_min <= Pch_max, got {s.Pch_min}, {s.Pch_max}")
    if not (0 <= s.Pdch_min <= s.Pdch_max):
        add("StorageUnit", s.id, "Pdch_min", f"need 0 <= Pdch_min <= Pdch_max, got {s.Pdch_min}, {s.Pdch_max}")
    if not (0 <= s.Cmin <= s.C0 <= s.Cmax):
        add("StorageUnit", s.id, "C0", f"need 0 <= Cmin <= C0 <= Cmax, got {s.Cmin}, {s.C0}, {s.Cmax}")
    if not (0 < s.eta <= 1):
        add("StorageUnit", s.id, "eta", f"efficiency must lie in (0, 1], got {s.eta}")
    for name in ("MC", "MD"):
        v = getattr(s, name)
        if v < 1 or int(v) != v:
            add("StorageUnit", s.id, name, f"must be an integer >= 1, got {v}")
    if s.terminal_policy not in TERMINAL_POLICIES:
        add("StorageUnit", s.id, "terminal_policy", f"unknown policy {s.terminal_policy!r}")


def _check_load(d: AdjustableLoad, T: int, add):
    if not (0 <= d.Dmin <= d.Dmax):
        add("AdjustableLoad", d.id, "Dmin", f"need 0 <= Dmin <= Dmax, got {d.Dmin}, {d.Dmax}")
    if not (1 <= d.alpha <= d.beta <= T):
        add("AdjustableLoad", d.id, "alpha", f"need 1 <= alpha <= beta <= {T}, got {d.alpha}, {d.beta}")
        return
    if d.MU < 1 or int(d.MU) != d.MU:
        add("AdjustableLoad", d.id, "MU", f"must be an integer >= 1, got {d.MU}")
    width = d.beta - d.alpha + 1
    if d.E < 0:
        add("AdjustableLoad", d.id, "E", f"required energy must be >= 0, got {d.E}")
    elif d.E > d.Dmax * width + 1e-9:
        add("AdjustableLoad", d.id, "E", f"infeasible-energy: E={d.E} exceeds Dmax*(beta-alpha+1)={d.Dmax * width}")
    elif d.E > 0 and d.E < d.Dmin * d.MU - 1e-9:
        add("AdjustableLoad", d.id, "E", f"infeasible-energy: E={d.E} below Dmin*MU={d.Dmin * d.MU}")
    elif d.E > 0 and d.MU > width:
        add("AdjustableLoad", d.id, "MU", f"minimum operating time {d.MU} exceeds window width {width}")


def check_instance(inst: MicrogridInstance) -> list[Violation]:
    """Return every invariant violation of ``inst`` (empty when consistent)."""
    errors: list[Violation] = []

    def add(*args):
        errors.append(Violation(*args))

    g = inst.grid
    if not isinstance(g, TimeGrid) or g.T < 1 or g.K < 1:
        add("TimeGrid", "", "T", "T and K must be >= 1")
        return errors
    ids = [x.id for x in (*inst.units, *inst.storages, *inst.adjustable)]
    for dup in sorted({i for i in ids if ids.count(i) > 1}):
        add("MicrogridInstance", dup, "id", "duplicate component id")
    for u in inst.units:
        _check_unit(u, add)
    for s in inst.storages:
        _check_storage(s, add)
    for d in inst.adjustable:
        _check_load(d, g.T, add)
    for s in inst.fixed_series:
        label = s.id or s.kind
        if s.kind not in SERIES_KINDS:
            add("FixedSeries", label, "kind", f"unknown series kind {s.kind!r}")
        if np.asarray(s.values).size != g.theta:
            add("FixedSeries", label, "values", f"length {np.asarray(s.values).size} != T*K = {g.theta}")
        elif not np.all(np.isfinite(s.values)):
            add("FixedSeries", label, "values", "values must be finite")
        elif s.kind == "fixed-load" and np.any(np.asarray(s.values) < 0):
            add("FixedSeries", label, "values", "fixed-load values must be >= 0")
    rho = np.asarray(inst.prices.rho)
    if rho.size != g.T:
        add("MarketPrice", "", "rho", f"need one price per hour ({g.T}), got {rho.size}")
    elif not np.all(np.isfinite(rho)):
        add("MarketPrice", "", "rho", "prices must be finite")
    if inst.PMmax < 0:
        add("MicrogridInstance", "", "PMmax", f"must be >= 0, got {inst.PMmax}")
    if inst.voll < 0:
        add("MicrogridInstance", "", "voll", f"must be >= 0, got {inst.voll}")
    for name in ("delta1", "delta2"):
        v = getattr(inst.flex, name)
        if v is not None and not v >= 0:
            add("FlexibilitySpec", "", name, f"must be >= 0 when present, got {v}")
    if not (0 <= inst.islanding_k <= g.theta) or int(inst.islanding_k) != inst.islanding_k:
        add("MicrogridInstance", "", "islanding_k", f"need integer 0 <= k <= {g.theta}, got {inst.islanding_k}")
    if not (0 < inst.psi_base <= 1):
        add("MicrogridInstance", "", "psi_base", f"need 0 < psi_base <= 1, got {inst.psi_base}")
    elif inst.islanding_k > 0 and inst.psi_base >= 1:
        add("MicrogridInstance", "", "psi_base", "islanding scenarios need psi_base < 1")
    if inst.scenario_stride < 1:
        add("MicrogridInstance", "", "scenario_stride", f"must be >= 1, got {inst.scenario_stride}")
    if inst.flex_scope not in FLEX_SCOPES:
        add("MicrogridInstance", "", "flex_scope", f"must be one of {FLEX_SCOPES}")
    return errors


def validate_instance(inst: MicrogridInstance) -> MicrogridInstance:
    """Return ``inst`` marked validated, or raise with the full list of violations."""
    errors = check_instance(inst)
    if errors:
        raise InstanceValidationError(errors)
    if inst.validated:
        return inst
    return dataclasses.replace(inst, validated=True)


# Where each model symbol lives. Values are "Type.field" for data, or a
# VariableIndex symbol for decision variables. Counter variables of the
# min-time constraints have no column: they are replaced by window sums.
PARAMETER_SYMBOLS = {
    "T": "TimeGrid.T",
    "K": "TimeGrid.K",
    "tau": "TimeGrid.tau",
    "Theta": "TimeGrid.theta",
    "P^min": "DispatchableUnit.Pmin",
    "P^max": "DispatchableUnit.Pmax",
    "UR": "DispatchableUnit.UR",
    "DR": "DispatchableUnit.DR",
    "UT": "DispatchableUnit.UT",
    "DT": "DispatchableUnit.DT",
    "F": "DispatchableUnit.cost",
    "SU": "DispatchableUnit.su_cost",
    "SD": "DispatchableUnit.sd_cost",
    "P^ch,min": "StorageUnit.Pch_min",
    "P^ch,max": "StorageUnit.Pch_max",
    "P^dch,min": "StorageUnit.Pdch_min",
    "P^dch,max": "StorageUnit.Pdch_max",
    "C^min": "StorageUnit.Cmin",
    "C^max": "StorageUnit.Cmax",
    "eta": "StorageUnit.eta",
    "MC": "StorageUnit.MC",
    "MD": "StorageUnit.MD",
    "D^min": "AdjustableLoad.Dmin",
    "D^max": "AdjustableLoad.Dmax",
    "alpha": "AdjustableLoad.alpha",
    "beta": "AdjustableLoad.beta",
    "E": "AdjustableLoad.E",
    "MU": "AdjustableLoad.MU",
    "P^c": "FixedSeries.values",
    "rho": "MarketPrice.rho",
    "Delta_1": "FlexibilitySpec.delta1",
    "Delta_2": "FlexibilitySpec.delta2",
    "P^M,max": "MicrogridInstance.PMmax",
    "lambda": "MicrogridInstance.voll",
    "k": "MicrogridInstance.islanding_k",
    "psi_0": "MicrogridInstance.psi_base",
}

VARIABLE_SYMBOLS = {
    "P": "P",
    "P^dch": "Pdch",
    "P^ch": "Pch",
    "P^M": "PM",
    "C": "C",
    "LS": "LS",
    "I": "I",
    "u": "u",
    "v": "v",
    "z": "z",
    "D": "D",
    "SU": "SUvar",
    "SD": "SDvar",
    "T^on": None,
    "T^off": None,
    "T^ch": None,
    "T^dch": None,
}
