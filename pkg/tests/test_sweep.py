import csv
from pathlib import Path

import numpy as np
import pytest

from mgflex.solver import SolveOptions
from mgflex.solver.lp import OPTIMAL
from mgflex.sweep import (CellResult, SweepResult, compute_incentives, read_table_csv, run_sweep, solve_cell,
                          write_incentives_csv)

from cases import smoke_instance

TABLE = Path(__file__).parent / "data" / "ramp_limit_costs.csv"
BASELINE = 11748.3


def _sweep(values, base, rel_gap=1e-4):
    cells = {(d2, d1): CellResult(d1, d2, OPTIMAL, v, validated=True) for (d2, d1), v in values.items()}
    d1s = sorted({k[1] for k in values})
    d2s = sorted({k[0] for k in values})
    return SweepResult(d1s, d2s, cells, CellResult(None, None, OPTIMAL, base, validated=True), rel_gap)


def test_read_table_shape():
    t = read_table_csv(TABLE)
    assert t.delta1 == [0.0, 0.5, 1.0, 2.0]
    assert t.delta2 == [0.5 * i for i in range(1, 11)]
    assert len(t.cells) == 40 and t.baseline is None
    assert t.cells[(0.5, 0.0)].objective == 36305.6
    assert t.objective_grid().shape == (10, 4)


def test_table_incentives_corners():
    inc = compute_incentives(read_table_csv(TABLE), baseline=BASELINE)
    assert inc[(0.5, 0.0)].value == pytest.approx(24557.3, abs=0.05)
    assert inc[(5.0, 0.0)].value == pytest.approx(697.3, abs=0.05)
    assert inc[(0.5, 2.0)].value == pytest.approx(77.0, abs=0.05)
    assert inc[(5.0, 2.0)].value == pytest.approx(21.8, abs=0.05)
    assert not any(i.flagged for i in inc.values())


def test_table_is_monotone():
    g = read_table_csv(TABLE).objective_grid()
    assert np.all(np.diff(g, axis=0) <= 0) and np.all(np.diff(g, axis=1) <= 0)


def test_baseline_row_is_read(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(TABLE.read_text() + f"baseline,{BASELINE}\n")
    t = read_table_csv(p)
    assert t.baseline.objective == BASELINE
    assert compute_incentives(t)[(0.5, 0.0)].value == pytest.approx(24557.3, abs=0.05)


def test_missing_baseline_raises():
    with pytest.raises(ValueError, match="baseline"):
        compute_incentives(read_table_csv(TABLE))


def test_ragged_row_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("delta2\\delta1,0,1\n0.5,10\n")
    with pytest.raises(ValueError, match="line 2"):
        read_table_csv(p)


def test_empty_table_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_table_csv(p)


def test_small_negative_is_floored_large_is_flagged():
    s = _sweep({(1.0, 0.0): 100.0 - 0.005, (1.0, 1.0): 90.0}, 100.0)
    inc = compute_incentives(s)
    assert inc[(1.0, 0.0)].value == 0.0 and not inc[(1.0, 0.0)].flagged
    assert inc[(1.0, 1.0)].value == pytest.approx(-10.0) and inc[(1.0, 1.0)].flagged


def test_missing_cells_skipped(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("delta2\\delta1,0,1\n0.5,10,\nbaseline,5\n")
    t = read_table_csv(p)
    assert not t.cells[(0.5, 1.0)].ok
    inc = compute_incentives(t)
    assert list(inc) == [(0.5, 0.0)] and inc[(0.5, 0.0)].value == 5.0


def test_incentives_csv(tmp_path):
    inc = compute_incentives(read_table_csv(TABLE), baseline=BASELINE)
    rows = list(csv.DictReader(write_incentives_csv(inc, tmp_path / "i.csv").open()))
    assert len(rows) == 40 and set(rows[0]) == {"delta1", "delta2", "incentive", "flagged"}


def test_run_sweep_smoke_and_table_roundtrip(tmp_path):
    inst = smoke_instance()
    res = run_sweep(inst, [0.0, 0.5], [0.5, 10.0], SolveOptions(rel_gap=1e-9))
    assert all(c.ok for c in res.cells.values()) and res.baseline.ok
    g = res.objective_grid()
    slack = 2e-9 * np.abs(g).max()
    assert np.all(np.diff(g, axis=0) <= slack) and np.all(np.diff(g, axis=1) <= slack)
    # very loose limits never bind, so they reproduce the baseline
    huge = run_sweep(inst, [1e3], [1e3], SolveOptions(rel_gap=1e-9))
    assert huge.cells[(1e3, 1e3)].objective == pytest.approx(res.baseline.objective, rel=1e-7)
    back = read_table_csv(res.write_table_csv(tmp_path / "t.csv"))
    np.testing.assert_allclose(back.objective_grid(), g)
    assert back.baseline.objective == pytest.approx(res.baseline.objective)
    cells = list(csv.DictReader(res.write_cells_csv(tmp_path / "c.csv").open()))
    assert len(cells) == 5


def test_sweep_is_deterministic_across_workers():
    inst = smoke_instance()
    a = run_sweep(inst, [0.0, 1.0], [0.5, 2.0], workers=1, baseline=False)
    b = run_sweep(inst, [0.0, 1.0], [0.5, 2.0], workers=3, baseline=False)
    np.testing.assert_array_equal(a.objective_grid(), b.objective_grid())
    assert a.baseline is None


def test_bad_lists_rejected():
    with pytest.raises(ValueError):
        run_sweep(smoke_instance(), [], [1.0])
    with pytest.raises(ValueError):
        run_sweep(smoke_instance(), [-1.0], [1.0])


def test_solve_cell_keeps_schedule():
    cell = solve_cell(smoke_instance(), 0.5, 1.0, SolveOptions(), keep_schedule=True)
    assert cell.ok and cell.schedule is not None
    assert cell.curtailed_mwh >= 0
