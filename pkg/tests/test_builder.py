import dataclasses

import numpy as np
import pytest

from mgflex import (AdjustableLoad, DispatchableUnit, FixedSeries, FlexibilitySpec, MarketPrice, MicrogridInstance,
                    PiecewiseLinearCost, StorageUnit, VarKey, assemble, build_envelope, generate_scenarios,
                    make_time_grid, solve_lp, validate_instance)

from mgflex.solver import OPTIMAL, solve_milp

from cases import smoke_instance


def build(inst):
    scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
    model, vi = assemble(inst, build_envelope(inst), scen)
    model.check()
    return model, vi, scen


def lp_with(model, vi, fixes):
    lb, ub = model.lb.copy(), model.ub.copy()
    for key, val in fixes.items():
        lb[vi.col(key)] = ub[vi.col(key)] = val
    return solve_lp(model, lb=lb, ub=ub)


def simple(T=2, K=2, units=(), storages=(), loads=(), load=1.0, **kw):
    n = T * K
    series = [FixedSeries("fixed-load", np.full(n, load)), FixedSeries("prosumer-net-load", np.full(n, 3.0))]
    args = dict(PMmax=5.0, voll=1000.0)
    args.update(kw)
    return validate_instance(MicrogridInstance(make_time_grid(T, K), units, storages, loads, series,
                                               MarketPrice(np.full(T, 50.0)), **args))


def unit(**kw):
    args = dict(id="g1", Pmin=0.0, Pmax=4.0, UR=4.0, DR=4.0, UT=1, DT=1,
                cost=PiecewiseLinearCost.linear(50.0, 4.0))
    args.update(kw)
    return DispatchableUnit(**args)


def test_curtailment_coefficient():
    # psi_base chosen so each of the six islanding scenarios weighs 0.001
    inst = simple(T=1, K=6, voll=10000.0, islanding_k=1, psi_base=0.994)
    model, vi, scen = build(inst)
    np.testing.assert_allclose(scen.psi[1:], 0.001)
    assert model.c[vi.col(VarKey("LS", "", 1, 3, 2))] == pytest.approx(1.6667, abs=5e-5)


def test_linear_cost_coefficient():
    model, vi, _ = build(simple(T=1, K=6, units=[unit()]))
    assert model.c[vi.col(VarKey("P", "g1", 1, 4, 0))] == pytest.approx(50 / 6)


def test_objective_touches_only_power_exchange_and_curtailment():
    model, vi, _ = build(simple(units=[unit()]))
    used = {vi.key(j).symbol for j in np.flatnonzero(model.c)}
    assert used <= {"P", "PM", "LS", "I"}


def test_islanded_balance_without_exchange():
    inst = simple(T=1, K=2, units=[unit()], load=2.0, islanding_k=2, psi_base=0.5)
    model, vi, scen = build(inst)
    assert scen.S == 3
    assert model.ub[vi.col(VarKey("PM", "", 1, 1, 1))] == 0.0
    assert model.lb[vi.col(VarKey("PM", "", 1, 1, 1))] == 0.0
    out = lp_with(model, vi, {VarKey("I", "g1", 1): 1.0, VarKey("P", "g1", 1, 1, 1): 1.5})
    assert out.status == OPTIMAL
    assert out.x[vi.col(VarKey("LS", "", 1, 1, 1))] == pytest.approx(0.5)


def test_nondispatchable_output_nets_the_load():
    inst = simple(T=1, K=1, load=3.0)
    inst = dataclasses.replace(inst, fixed_series=inst.fixed_series + (
        FixedSeries("nondispatchable-generation", [1.0]),))
    model, vi, _ = build(validate_instance(inst))
    i = model.row_names.index("balance_t1_k1_s0")
    assert model.rhs[i] == pytest.approx(2.0)


def test_zero_load_without_exchange_is_feasible_at_zero():
    inst = simple(T=1, K=2, units=[unit(Pmin=0.0)], load=0.0, PMmax=0.0)
    model, vi, _ = build(inst)
    out = solve_lp(model)
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(0.0)


def test_zero_intra_limit_with_flat_aggregate_pins_exchange():
    inst = simple(T=2, K=3, units=[unit()], flex=FlexibilitySpec(0.0, None))
    model, vi, _ = build(inst)
    out = lp_with(model, vi, {VarKey("PM", "", 1, 1, 0): 0.75, VarKey("PM", "", 2, 1, 0): -0.5})
    x = out.x
    for k in (2, 3):
        assert x[vi.col(VarKey("PM", "", 1, k, 0))] == pytest.approx(0.75)
        assert x[vi.col(VarKey("PM", "", 2, k, 0))] == pytest.approx(-0.5)


def test_price_based_mode_has_no_flexibility_rows():
    model, _, _ = build(simple(units=[unit()]))
    assert not any(f.startswith("flex") for f in model.row_family)
    model, _, _ = build(simple(units=[unit()], flex=FlexibilitySpec(1.0, 1.0)))
    assert any(f.startswith("flex") for f in model.row_family)


def test_minimum_up_time_after_startup():
    inst = simple(T=8, K=1, units=[unit(UT=3, initial_status=-2, initial_power=0.0)])
    model, vi, _ = build(inst)
    I = lambda t: VarKey("I", "g1", t)  # noqa: E731
    base = {I(4): 0.0, I(5): 1.0}
    assert lp_with(model, vi, base).status == OPTIMAL
    for t in (6, 7):
        assert lp_with(model, vi, {**base, I(t): 0.0}).status == "infeasible"
    assert lp_with(model, vi, {**base, I(6): 1.0, I(7): 1.0, I(8): 0.0}).status == OPTIMAL


def test_ramp_up_bound():
    inst = simple(T=1, K=3, units=[unit(UR=0.5)])
    model, vi, _ = build(inst)
    P = lambda k: VarKey("P", "g1", 1, k, 0)  # noqa: E731
    fixes = {VarKey("I", "g1", 1): 1.0, P(1): 2.0}
    assert lp_with(model, vi, {**fixes, P(2): 2.5}).status == OPTIMAL
    assert lp_with(model, vi, {**fixes, P(2): 2.51}).status == "infeasible"


def test_offline_unit_produces_nothing():
    inst = simple(T=2, K=2, units=[unit()], load=3.0)
    model, vi, _ = build(inst)
    out = lp_with(model, vi, {VarKey("I", "g1", 1): 0.0, VarKey("I", "g1", 2): 0.0})
    P = [out.x[j] for j in vi.columns("P")]
    np.testing.assert_allclose(P, 0.0, atol=1e-12)


def storage(**kw):
    args = dict(id="b1", Pch_min=0.0, Pch_max=2.0, Pdch_min=0.0, Pdch_max=2.0, Cmin=0.0, Cmax=4.0, C0=2.0,
                eta=0.9)
    args.update(kw)
    return StorageUnit(**args)


def test_discharge_drops_state_of_charge():
    model, vi, _ = build(simple(T=1, K=6, storages=[storage()]))
    fixes = {VarKey("u", "b1", 1): 1.0, VarKey("Pdch", "b1", 1, 1, 0): 1.8}
    out = lp_with(model, vi, fixes)
    assert 2.0 - out.x[vi.col(VarKey("C", "b1", 1, 1, 0))] == pytest.approx(1.8 / 6 / 0.9)
    assert 1.8 / 6 / 0.9 == pytest.approx(0.3333, abs=1e-4)


def test_idle_storage_keeps_its_charge():
    model, vi, _ = build(simple(T=2, K=3, storages=[storage()]))
    out = lp_with(model, vi, {VarKey("u", "b1", 1): 0.0, VarKey("v", "b1", 1): 0.0})
    for k in (1, 2, 3):
        assert out.x[vi.col(VarKey("C", "b1", 1, k, 0))] == pytest.approx(2.0)
        assert out.x[vi.col(VarKey("Pdch", "b1", 1, k, 0))] == pytest.approx(0.0)


def test_storage_modes_are_exclusive():
    model, vi, _ = build(simple(T=2, K=1, storages=[storage()]))
    assert lp_with(model, vi, {VarKey("u", "b1", 1): 1.0, VarKey("v", "b1", 1): 1.0}).status == "infeasible"


def test_one_hour_window_at_full_energy():
    load = AdjustableLoad("d1", 0.2, 1.5, 2, 2, 1.5, 1)
    model, vi, _ = build(simple(T=3, K=2, loads=[load]))
    out = solve_lp(model)
    assert out.x[vi.col(VarKey("z", "d1", 2))] == pytest.approx(1.0)
    for k in (1, 2):
        assert out.x[vi.col(VarKey("D", "d1", 2, k))] == pytest.approx(1.5)


def test_zero_energy_allows_idle_load():
    load = AdjustableLoad("d1", 0.2, 1.5, 1, 3, 0.0, 1)
    model, vi, _ = build(simple(T=3, K=2, loads=[load]))
    zeros = {VarKey("z", "d1", t): 0.0 for t in (1, 2, 3)}
    out = lp_with(model, vi, zeros)
    assert out.status == OPTIMAL
    np.testing.assert_allclose([out.x[j] for j in vi.columns("D")], 0.0, atol=1e-12)


def test_minimum_operating_time():
    load = AdjustableLoad("d1", 0.1, 1.5, 1, 4, 1.0, 2)
    model, vi, _ = build(simple(T=4, K=1, loads=[load]))
    z = lambda t: VarKey("z", "d1", t)  # noqa: E731
    assert lp_with(model, vi, {z(1): 0.0, z(2): 1.0, z(3): 0.0}).status == "infeasible"
    assert lp_with(model, vi, {z(1): 0.0, z(2): 1.0, z(3): 1.0, z(4): 0.0}).status == OPTIMAL


def test_binary_counts():
    model, _, _ = build(simple(T=2, K=2, units=[unit()]))
    assert model.stats()["binaries"] == 2
    model, _, _ = build(simple(T=2, K=2, units=[unit()], storages=[storage()]))
    assert model.stats()["binaries"] == 6


def test_assembly_is_deterministic():
    a, _, _ = build(smoke_instance())
    b, _, _ = build(smoke_instance())
    assert a.col_names == b.col_names and a.row_names == b.row_names
    assert (a.A != b.A).nnz == 0
    np.testing.assert_array_equal(a.c, b.c)
    np.testing.assert_array_equal(a.rhs, b.rhs)


def test_unvalidated_instance_is_refused():
    inst = dataclasses.replace(smoke_instance(), validated=False)
    with pytest.raises(ValueError):
        assemble(inst, None, generate_scenarios(inst.grid, 0))


def test_names_are_unique_and_semantic():
    model, vi, _ = build(smoke_instance())
    assert len(set(model.col_names)) == len(model.col_names)
    assert len(set(model.row_names)) == len(model.row_names)
    assert "P_g1_t2_k1_s0" in model.col_names
    assert vi.col(VarKey("P", "g1", 2, 1, 0)) == model.col_names.index("P_g1_t2_k1_s0")


def test_flex_scope_all_conflicts_with_islanding_when_delta1_is_zero():
    # islanded sub-periods force PM=0 while a zero intra-hour limit pins PM to
    # the aggregate ramp, so applying the limits everywhere leaves no solution
    for scope, feasible in (("connected", True), ("all", False)):
        inst = validate_instance(dataclasses.replace(smoke_instance(0.0, 0.5), flex_scope=scope, validated=False))
        scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base, inst.scenario_stride)
        model, _ = assemble(inst, build_envelope(inst), scen)
        res = solve_milp(model)
        assert (res.x is not None) == feasible
        if not feasible:
            assert "flex_intra" in res.hint
