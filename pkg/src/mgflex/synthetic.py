"""Deterministic synthetic day used for the shipped sample case.

The feeder's prosumer aggregate follows a duck shape: a morning shoulder,
a deep solar dip around noon and a steep evening ramp, with values moving
linearly through each hour so intra-hour steps are nonzero. The microgrid
itself has a 3-6 MW load, rooftop-scale solar, two dispatchable units, one
battery and one shiftable load.
"""

from __future__ import annotations

import numpy as np

from .core import (AdjustableLoad, DispatchableUnit, FixedSeries, MarketPrice, MicrogridInstance,
                   PiecewiseLinearCost, StorageUnit, make_time_grid, validate_instance)

T, K = 24, 6

# hourly anchor values of the prosumer aggregate (MW), hour 1 .. 24, plus the value after hour 24
DUCK = np.array([5.0, 4.8, 4.6, 4.5, 4.6, 5.0, 5.8, 6.4, 5.6, 4.4, 3.2, 2.4,
                 2.0, 2.1, 2.6, 3.6, 5.2, 7.0, 8.6, 9.0, 8.6, 7.8, 6.8, 5.8, 5.2])
PRICES = np.array([32, 30, 30, 30, 34, 42, 60, 75, 68, 55, 45, 40,
                   38, 40, 48, 62, 85, 110, 120, 115, 95, 72, 52, 40], dtype=float)


def _within_hour(anchors: np.ndarray) -> np.ndarray:
    """Linear path from each hourly anchor toward the next, sampled at K sub-periods."""
    frac = np.arange(K) / K
    return anchors[:-1, None] + (anchors[1:] - anchors[:-1])[:, None] * frac[None, :]


def prosumer_aggregate() -> np.ndarray:
    ripple = 0.15 * np.sin(np.arange(T * K) * 2.1).reshape(T, K)
    return _within_hour(DUCK) + ripple


def microgrid_load() -> np.ndarray:
    hours = np.arange(T + 1)
    anchors = 4.5 - 1.2 * np.cos(2 * np.pi * (hours - 3) / 24) + 0.4 * np.sin(2 * np.pi * hours / 8)
    return _within_hour(anchors)


def microgrid_solar() -> np.ndarray:
    t = (np.arange(T * K) + 0.5) / K  # hour of day at sub-period midpoints
    shape = np.clip(np.sin(np.pi * (t - 6.0) / 13.0), 0.0, None)
    return (2.5 * shape).reshape(T, K)


def synthetic_instance(stride: int = 12) -> MicrogridInstance:
    units = (
        DispatchableUnit("g1", Pmin=1.0, Pmax=5.0, UR=0.5, DR=0.5, UT=3, DT=2,
                         cost=PiecewiseLinearCost([1.0, 3.0, 5.0], [40.0, 130.0, 240.0]),
                         initial_status=5, initial_power=2.0),
        DispatchableUnit("g2", Pmin=0.2, Pmax=3.0, UR=1.5, DR=1.5, UT=1, DT=1,
                         cost=PiecewiseLinearCost([0.2, 1.5, 3.0], [5.0, 105.0, 255.0]),
                         su_cost=5.0),
    )
    storage = StorageUnit("b1", Pch_min=0.0, Pch_max=2.0, Pdch_min=0.0, Pdch_max=2.0,
                          Cmin=0.8, Cmax=8.0, C0=4.0, eta=0.9, MC=1, MD=1, terminal_policy="at-least-initial")
    load = AdjustableLoad("d1", Dmin=0.5, Dmax=2.0, alpha=10, beta=20, E=8.0, MU=3)
    series = (
        FixedSeries("fixed-load", microgrid_load().ravel(), "mg-load"),
        FixedSeries("nondispatchable-generation", microgrid_solar().ravel(), "mg-solar"),
        FixedSeries("prosumer-net-load", prosumer_aggregate().ravel(), "feeder-prosumers"),
    )
    inst = MicrogridInstance(
        grid=make_time_grid(T, K), units=units, storages=(storage,), adjustable=(load,), fixed_series=series,
        prices=MarketPrice(PRICES), PMmax=10.0, voll=10000.0, islanding_k=4, psi_base=0.9,
        scenario_stride=stride, name="synthetic",
    )
    return validate_instance(inst)
