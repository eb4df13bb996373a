import csv
import json
import shutil
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from mgflex import InstanceValidationError, build_envelope, generate_scenarios
from mgflex.io import (CaseError, load_case, read_series_csv, save_case, schedule_table, write_envelope_csv,
                       write_scenarios_csv)
from mgflex.schedule import Schedule
from mgflex.synthetic import synthetic_instance

from cases import smoke_instance

SAMPLE = Path(str(resources.files("mgflex.data").joinpath("synthetic/synthetic.json")))


@pytest.fixture
def case_dir(tmp_path):
    d = tmp_path / "case"
    shutil.copytree(SAMPLE.parent, d)
    return d


def test_sample_case_loads_and_matches_generator():
    inst = load_case(SAMPLE)
    ref = synthetic_instance()
    assert inst.validated
    assert inst.units == ref.units and inst.storages == ref.storages and inst.adjustable == ref.adjustable
    for a, b in zip(inst.fixed_series, ref.fixed_series):
        assert a.kind == b.kind and a.id == b.id
        np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(inst.prices.rho, ref.prices.rho)
    assert (inst.islanding_k, inst.psi_base, inst.scenario_stride) == (4, 0.9, 12)


def test_save_load_roundtrip(tmp_path):
    inst = smoke_instance()
    back = load_case(save_case(inst, tmp_path, "smoke"))
    assert back.units == inst.units and back.storages == inst.storages
    assert back.flex == inst.flex
    np.testing.assert_array_equal(back.fixed_load, inst.fixed_load)


def test_hourly_ramps_are_divided_by_k(case_dir):
    path = case_dir / "synthetic.json"
    doc = json.loads(path.read_text())
    g = doc["units"][0]
    g["ramp_up_per_hour"] = g.pop("ramp_up_per_subperiod") * 6
    g["ramp_down_per_hour"] = g.pop("ramp_down_per_subperiod") * 6
    path.write_text(json.dumps(doc))
    assert load_case(path).units[0].UR == pytest.approx(0.5)


def test_subperiod_beyond_k_names_the_row(case_dir):
    f = case_dir / "synthetic_fixed-load_mg-load.csv"
    lines = f.read_text().splitlines()
    lines[3] = "1,7,4.0"
    f.write_text("\n".join(lines) + "\n")
    with pytest.raises(CaseError) as err:
        load_case(case_dir / "synthetic.json")
    assert err.value.line == 4 and err.value.column == "k"
    assert "synthetic_fixed-load_mg-load.csv" in str(err.value)


def test_missing_price_column(case_dir):
    f = case_dir / "synthetic_prices.csv"
    rows = list(csv.reader(f.open()))
    f.write_text("\n".join(",".join(r[:1]) for r in rows) + "\n")
    with pytest.raises(CaseError) as err:
        load_case(case_dir / "synthetic.json")
    assert err.value.column == "value" and err.value.line == 1


def test_missing_prices_entry_is_a_schema_error(case_dir):
    path = case_dir / "synthetic.json"
    doc = json.loads(path.read_text())
    del doc["prices"]
    path.write_text(json.dumps(doc))
    with pytest.raises(CaseError, match="schema error"):
        load_case(path)


def test_unsupported_schema_version(case_dir):
    path = case_dir / "synthetic.json"
    doc = json.loads(path.read_text())
    doc["schema_version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(CaseError, match="schema_version"):
        load_case(path)


def test_invalid_values_are_forwarded(case_dir):
    path = case_dir / "synthetic.json"
    doc = json.loads(path.read_text())
    doc["units"][0]["Pmin"] = 9.0
    path.write_text(json.dumps(doc))
    with pytest.raises(InstanceValidationError, match="g1.Pmin"):
        load_case(path)


def test_bad_number_and_duplicates(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("t,k,value\n1,1,abc\n")
    with pytest.raises(CaseError, match="not a number"):
        read_series_csv(f, 1, 1)
    f.write_text("t,k,value\n1,1,1\n1,1,2\n")
    with pytest.raises(CaseError, match="duplicate"):
        read_series_csv(f, 1, 1)
    f.write_text("t,k,value\n1,1,1\n")
    with pytest.raises(CaseError, match="missing entry"):
        read_series_csv(f, 1, 2)


def test_dump_files(tmp_path):
    inst = smoke_instance()
    env = build_envelope(inst)
    scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
    rows = list(csv.reader(write_envelope_csv(env, tmp_path / "env.csv").open()))
    assert rows[0] == ["t", "k", "kind", "low", "up"]
    assert len(rows) == 1 + 3 + 2
    rows = list(csv.reader(write_scenarios_csv(scen, tmp_path / "scen.csv").open()))
    assert rows[0] == ["s", "psi", "start", "length"]
    assert len(rows) == 1 + scen.S


def test_schedule_table_shape_and_utility_power():
    inst = smoke_instance()
    T, K, S = 3, 2, 3
    rng = np.random.default_rng(0)
    z = np.zeros((T, K, S))
    sched = Schedule({"g1": rng.random((T, K, S))}, {"g1": np.ones(T)}, {"b1": z}, {"b1": z}, {"b1": z},
                     {"b1": np.zeros(T)}, {"b1": np.zeros(T)}, {"d1": np.zeros((T, K))}, {"d1": np.zeros(T)},
                     PM=rng.normal(size=(T, K, S)), LS=z)
    header, rows = schedule_table(inst, sched, scenarios=[0, 2])
    assert len(rows) == 2 * T * K
    agg = inst.series_total("prosumer-net-load")
    i_pm, i_pu = header.index("PM"), header.index("Pu")
    for r in rows:
        assert r[i_pu] == r[i_pm] + agg[r[1] - 1, r[2] - 1]
