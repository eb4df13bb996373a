"""Time-dependent bounds on the microgrid net-load change.

The operator limits the utility power ``Pu = PM + agg`` to steps of at most
``delta1`` between sub-periods of an hour and ``delta2`` across hour
boundaries. Substituting ``Pu`` turns those limits into bounds on steps of
the microgrid exchange ``PM`` that shift with the prosumer forecast ``agg``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import FixedSeries, MicrogridInstance


@dataclass(frozen=True)
class FlexibilityEnvelope:
    """Bounds on PM steps; unconstrained entries hold NaN.

    ``intra_*[t, k]`` bounds ``PM[t, k] - PM[t, k-1]`` (k >= 1, 0-based) and
    ``inter_*[t]`` bounds ``PM[t, 0] - PM[t-1, K-1]`` (t >= 1). When the
    utility power of the previous day is known, ``initial_*`` are absolute
    bounds on ``PM[0, 0]``.
    """

    agg: np.ndarray
    delta1: Optional[float]
    delta2: Optional[float]
    intra_low: Optional[np.ndarray] = None
    intra_up: Optional[np.ndarray] = None
    inter_low: Optional[np.ndarray] = None
    inter_up: Optional[np.ndarray] = None
    initial_low: Optional[float] = None
    initial_up: Optional[float] = None


def aggregate_prosumers(profiles: Sequence[FixedSeries], T: int, K: int) -> np.ndarray:
    """Sum prosumer/consumer net-load forecasts into a (T, K) array."""
    total = np.zeros((T, K))
    for prof in profiles:
        values = np.asarray(prof.values, dtype=float)
        if values.size != T * K:
            raise ValueError(f"profile {prof.id or prof.kind!r} has {values.size} values, expected {T * K}")
        total = total + values.reshape(T, K)
    return total


def intra_hour_envelope(agg: np.ndarray, delta1: float) -> tuple[np.ndarray, np.ndarray]:
    if delta1 is None or not delta1 >= 0:
        raise ValueError(f"delta1 must be >= 0, got {delta1}")
    agg = np.asarray(agg, dtype=float)
    step = np.full(agg.shape, np.nan)
    step[:, 1:] = agg[:, 1:] - agg[:, :-1]
    return -delta1 - step, delta1 - step


def inter_hour_envelope(agg: np.ndarray, delta2: float) -> tuple[np.ndarray, np.ndarray]:
    if delta2 is None or not delta2 >= 0:
        raise ValueError(f"delta2 must be >= 0, got {delta2}")
    agg = np.asarray(agg, dtype=float)
    step = np.full(agg.shape[0], np.nan)
    step[1:] = agg[1:, 0] - agg[:-1, -1]
    return -delta2 - step, delta2 - step


def build_envelope(inst: MicrogridInstance) -> Optional[FlexibilityEnvelope]:
    """Envelope for ``inst.flex``, or None in price-based mode (no limits)."""
    T, K = inst.grid.T, inst.grid.K
    agg = aggregate_prosumers(inst.series("prosumer-net-load"), T, K)
    flex = inst.flex
    if not flex.active:
        return None
    kw = {}
    if flex.delta1 is not None:
        kw["intra_low"], kw["intra_up"] = intra_hour_envelope(agg, flex.delta1)
    if flex.delta2 is not None:
        kw["inter_low"], kw["inter_up"] = inter_hour_envelope(agg, flex.delta2)
        if inst.previous_utility_power is not None:
            base = inst.previous_utility_power - agg[0, 0]
            kw["initial_low"] = base - flex.delta2
            kw["initial_up"] = base + flex.delta2
    return FlexibilityEnvelope(agg=agg, delta1=flex.delta1, delta2=flex.delta2, **kw)


def envelope_rows(env: FlexibilityEnvelope) -> list[tuple[int, int, str, float, float]]:
    """Flatten to ``(t, k, kind, low, up)`` records with 1-based t, k."""
    rows = []
    if env.initial_low is not None:
        rows.append((1, 1, "initial", env.initial_low, env.initial_up))
    T, K = env.agg.shape
    for t in range(T):
        if env.inter_low is not None and t > 0:
            rows.append((t + 1, 1, "inter", float(env.inter_low[t]), float(env.inter_up[t])))
        if env.intra_low is not None:
            for k in range(1, K):
                rows.append((t + 1, k + 1, "intra", float(env.intra_low[t, k]), float(env.intra_up[t, k])))
    return rows
