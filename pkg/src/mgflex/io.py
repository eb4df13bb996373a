"""Case files (JSON + CSV time series) and CSV/JSON reports."""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import jsonschema
import numpy as np

from .core import (AdjustableLoad, DispatchableUnit, FixedSeries, FlexibilitySpec, MarketPrice, MicrogridInstance,
                   PiecewiseLinearCost, StorageUnit, make_time_grid, validate_instance)
from .envelope import FlexibilityEnvelope, envelope_rows
from .scenarios import ScenarioSet, scenario_rows
from .schedule import Schedule

SCHEMA_VERSION = 1


class CaseError(ValueError):
    """Problem in a case file; names the file and, where known, line and column."""

    def __init__(self, file, message, line: Optional[int] = None, column: Optional[str] = None):
        self.file, self.line, self.column = str(file), line, column
        where = self.file
        if line is not None:
            where += f", line {line}"
        if column is not None:
            where += f", column {column!r}"
        super().__init__(f"{where}: {message}")


def case_schema() -> dict:
    return json.loads(resources.files("mgflex.data").joinpath("case.schema.json").read_text())


def _read_table(path: Path, columns: tuple[str, ...]) -> list[tuple[int, dict]]:
    if not path.exists():
        raise CaseError(path, "file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CaseError(path, "empty file", line=1) from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise CaseError(path, f"header {header} lacks required column(s) {missing}", line=1, column=missing[0])
        extra = [h for h in header if h not in columns]
        if extra:
            raise CaseError(path, f"unexpected column(s) {extra}", line=1, column=extra[0])
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) != len(header):
                raise CaseError(path, f"expected {len(header)} fields, got {len(rec)}", line=lineno)
            rows.append((lineno, dict(zip(header, (x.strip() for x in rec)))))
    return rows


def _int_field(path, lineno, rec, name, lo, hi):
    try:
        v = int(rec[name])
    except ValueError:
        raise CaseError(path, f"{rec[name]!r} is not an integer", lineno, name) from None
    if not lo <= v <= hi:
        raise CaseError(path, f"{name}={v} outside 1..{hi}", lineno, name)
    return v


def _float_field(path, lineno, rec, name):
    try:
        v = float(rec[name])
    except ValueError:
        raise CaseError(path, f"{rec[name]!r} is not a number", lineno, name) from None
    if not np.isfinite(v):
        raise CaseError(path, f"value {v} is not finite", lineno, name)
    return v


def read_series_csv(path, T: int, K: int) -> np.ndarray:
    """A ``t,k,value`` table with every (t, k) exactly once, as a (T, K) array."""
    path = Path(path)
    out = np.full((T, K), np.nan)
    for lineno, rec in _read_table(path, ("t", "k", "value")):
        t = _int_field(path, lineno, rec, "t", 1, T)
        k = _int_field(path, lineno, rec, "k", 1, K)
        if not np.isnan(out[t - 1, k - 1]):
            raise CaseError(path, f"duplicate entry for t={t}, k={k}", lineno)
        out[t - 1, k - 1] = _float_field(path, lineno, rec, "value")
    if np.isnan(out).any():
        t, k = np.argwhere(np.isnan(out))[0] + 1
        raise CaseError(path, f"missing entry for t={t}, k={k}")
    return out


def read_price_csv(path, T: int) -> np.ndarray:
    """A ``t,value`` table with one price per hour."""
    path = Path(path)
    out = np.full(T, np.nan)
    for lineno, rec in _read_table(path, ("t", "value")):
        t = _int_field(path, lineno, rec, "t", 1, T)
        if not np.isnan(out[t - 1]):
            raise CaseError(path, f"duplicate entry for t={t}", lineno)
        out[t - 1] = _float_field(path, lineno, rec, "value")
    if np.isnan(out).any():
        raise CaseError(path, f"missing price for t={int(np.flatnonzero(np.isnan(out))[0]) + 1}")
    return out


def _cost(spec: dict, pmax: float) -> PiecewiseLinearCost:
    if "marginal" in spec:
        return PiecewiseLinearCost.linear(spec["marginal"], pmax, spec.get("no_load", 0.0))
    return PiecewiseLinearCost(spec["power"], spec["cost"])


def _unit(spec: dict, K: int) -> DispatchableUnit:
    if "ramp_up_per_hour" in spec:
        ur, dr = spec["ramp_up_per_hour"] / K, spec["ramp_down_per_hour"] / K
    else:
        ur, dr = spec["ramp_up_per_subperiod"], spec["ramp_down_per_subperiod"]
    return DispatchableUnit(
        id=spec["id"], Pmin=spec["Pmin"], Pmax=spec["Pmax"], UR=ur, DR=dr, UT=spec["UT"], DT=spec["DT"],
        cost=_cost(spec["cost"], spec["Pmax"]), su_cost=spec.get("su_cost", 0.0), sd_cost=spec.get("sd_cost", 0.0),
        initial_status=spec.get("initial_status"), initial_power=spec.get("initial_power", 0.0))


def load_case(path, validate: bool = True) -> MicrogridInstance:
    """Parse a case JSON and its CSV series; hourly ramp inputs are divided by K."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise CaseError(path, "file not found") from None
    except json.JSONDecodeError as exc:
        raise CaseError(path, exc.msg, line=exc.lineno) from None
    try:
        jsonschema.validate(doc, case_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise CaseError(path, f"schema error at {where}: {exc.message}") from None

    base = path.parent
    T, K = doc["T"], doc["K"]
    grid = make_time_grid(T, K)
    series = tuple(FixedSeries(s["kind"], read_series_csv(base / s["file"], T, K).ravel(), s.get("id", ""))
                   for s in doc.get("series", []))
    flex = doc.get("flexibility", {})
    isl = doc.get("islanding", {})
    inst = MicrogridInstance(
        grid=grid,
        units=tuple(_unit(u, K) for u in doc.get("units", [])),
        storages=tuple(StorageUnit(
            id=s["id"], Pch_min=s.get("Pch_min", 0.0), Pch_max=s["Pch_max"], Pdch_min=s.get("Pdch_min", 0.0),
            Pdch_max=s["Pdch_max"], Cmin=s["Cmin"], Cmax=s["Cmax"], C0=s["C0"], eta=s["eta"], MC=s.get("MC", 1),
            MD=s.get("MD", 1), terminal_policy=s.get("terminal_policy", "none")) for s in doc.get("storages", [])),
        adjustable=tuple(AdjustableLoad(
            id=d["id"], Dmin=d["Dmin"], Dmax=d["Dmax"], alpha=d["alpha"], beta=d["beta"], E=d["E"],
            MU=d.get("MU", 1)) for d in doc.get("adjustable_loads", [])),
        fixed_series=series,
        prices=MarketPrice(read_price_csv(base / doc["prices"]["file"], T)),
        PMmax=doc["PMmax"], voll=doc["voll"],
        flex=FlexibilitySpec(flex.get("delta1"), flex.get("delta2")),
        islanding_k=isl.get("k", 0), psi_base=isl.get("psi_base", 0.9), scenario_stride=isl.get("stride", 1),
        previous_utility_power=doc.get("previous_utility_power"),
        curtailment_allowed=doc.get("curtailment_allowed", True),
        flex_scope=doc.get("flex_scope", "connected"),
        name=doc.get("name", path.stem),
    )
    return validate_instance(inst) if validate else inst


def _write_series(path: Path, arr: np.ndarray):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "k", "value"])
        for t in range(arr.shape[0]):
            for k in range(arr.shape[1]):
                w.writerow([t + 1, k + 1, repr(float(arr[t, k]))])


def save_case(inst: MicrogridInstance, directory, stem: str = "case") -> Path:
    """Write ``inst`` as ``<stem>.json`` plus CSV series; ramps are stored per sub-period."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    T, K = inst.grid.T, inst.grid.K
    series = []
    for i, s in enumerate(inst.fixed_series):
        fname = f"{stem}_{s.kind}_{s.id or i}.csv"
        _write_series(d / fname, np.asarray(s.values).reshape(T, K))
        entry = {"kind": s.kind, "file": fname}
        if s.id:
            entry["id"] = s.id
        series.append(entry)
    price_file = f"{stem}_prices.csv"
    with (d / price_file).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, v in enumerate(inst.prices.rho, start=1):
            w.writerow([t, repr(float(v))])
    doc = {
        "schema_version": SCHEMA_VERSION, "name": inst.name, "T": T, "K": K,
        "PMmax": inst.PMmax, "voll": inst.voll, "prices": {"file": price_file},
        "units": [{
            "id": g.id, "Pmin": g.Pmin, "Pmax": g.Pmax, "ramp_up_per_subperiod": g.UR,
            "ramp_down_per_subperiod": g.DR, "UT": g.UT, "DT": g.DT,
            "cost": {"power": [float(x) for x in g.cost.power], "cost": [float(x) for x in g.cost.cost]},
            "su_cost": g.su_cost, "sd_cost": g.sd_cost, "initial_status": g.initial_status,
            "initial_power": g.initial_power} for g in inst.units],
        "storages": [{
            "id": b.id, "Pch_min": b.Pch_min, "Pch_max": b.Pch_max, "Pdch_min": b.Pdch_min, "Pdch_max": b.Pdch_max,
            "Cmin": b.Cmin, "Cmax": b.Cmax, "C0": b.C0, "eta": b.eta, "MC": b.MC, "MD": b.MD,
            "terminal_policy": b.terminal_policy} for b in inst.storages],
        "adjustable_loads": [{
            "id": a.id, "Dmin": a.Dmin, "Dmax": a.Dmax, "alpha": a.alpha, "beta": a.beta, "E": a.E, "MU": a.MU}
            for a in inst.adjustable],
        "series": series,
        "flexibility": {"delta1": inst.flex.delta1, "delta2": inst.flex.delta2},
        "islanding": {"k": inst.islanding_k, "psi_base": inst.psi_base, "stride": inst.scenario_stride},
        "previous_utility_power": inst.previous_utility_power,
        "curtailment_allowed": inst.curtailment_allowed,
        "flex_scope": inst.flex_scope,
    }
    out = d / f"{stem}.json"
    out.write_text(json.dumps(doc, indent=2) + "\n")
    return out


# --- reports ---------------------------------------------------------------


def _write_rows(path, header: Iterable[str], rows: Iterable[Iterable]):
    path = Path(path)
    try:
        fh = path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror}") from exc
    with fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        w.writerows(rows)
    return path


def write_envelope_csv(env: FlexibilityEnvelope, path):
    return _write_rows(path, ("t", "k", "kind", "low", "up"), envelope_rows(env))


def write_scenarios_csv(scen: ScenarioSet, path):
    return _write_rows(path, ("s", "psi", "start", "length"), scenario_rows(scen))


def schedule_table(inst: MicrogridInstance, sched: Schedule, scenarios: Optional[Iterable[int]] = None):
    """Header and rows of the per-(t, k) schedule report, one block per scenario."""
    T, K = inst.grid.T, inst.grid.K
    S = sched.PM.shape[2]
    agg = inst.series_total("prosumer-net-load")
    header = ["s", "t", "k", "PM", "Pu", "LS"]
    header += [f"P_{g.id}" for g in inst.units] + [f"I_{g.id}" for g in inst.units]
    for b in inst.storages:
        header += [f"Pdch_{b.id}", f"Pch_{b.id}", f"SoC_{b.id}", f"u_{b.id}", f"v_{b.id}"]
    for d in inst.adjustable:
        header += [f"D_{d.id}", f"z_{d.id}"]
    rows = []
    for s in (range(S) if scenarios is None else scenarios):
        for t in range(T):
            for k in range(K):
                pm = sched.PM[t, k, s]
                row = [s, t + 1, k + 1, pm, pm + agg[t, k], sched.LS[t, k, s]]
                row += [sched.P[g.id][t, k, s] for g in inst.units]
                row += [int(sched.I[g.id][t]) for g in inst.units]
                for b in inst.storages:
                    row += [sched.Pdch[b.id][t, k, s], sched.Pch[b.id][t, k, s], sched.C[b.id][t, k, s],
                            int(sched.u[b.id][t]), int(sched.v[b.id][t])]
                for d in inst.adjustable:
                    row += [sched.D[d.id][t, k], int(sched.z[d.id][t])]
                rows.append(row)
    return header, rows


def write_schedule_csv(inst: MicrogridInstance, sched: Schedule, path, scenarios=None):
    header, rows = schedule_table(inst, sched, scenarios)
    return _write_rows(path, header, rows)


def write_json(obj, path):
    path = Path(path)
    try:
        path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror}") from exc
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
