"""Islanding scenarios for the "survive any k consecutive sub-periods" criterion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeGrid


@dataclass(frozen=True)
class ScenarioSet:
    """Islanding indicator ``w[t, k, s]`` (1 = grid-connected) and weights ``psi[s]``.

    Scenario 0 is always fully grid-connected. ``start[s]`` / ``length[s]``
    give the 1-based first islanded sub-period and the run length (0 for s=0).
    """

    w: np.ndarray
    psi: np.ndarray
    start: np.ndarray
    length: np.ndarray

    @property
    def S(self) -> int:
        return self.psi.size

    def connected(self, t: int, k: int, s: int) -> bool:
        return bool(self.w[t, k, s])


def generate_scenarios(grid: TimeGrid, k_island: int, psi_base: float = 0.9, stride: int = 1) -> ScenarioSet:
    """Enumerate the base scenario plus one sliding islanding window per start position.

    Windows that would run past the horizon end are truncated. ``stride``
    keeps every ``stride``-th start position (1, 1+stride, ...) and spreads
    ``1 - psi_base`` evenly over the kept scenarios.
    """
    theta = grid.theta
    if int(k_island) != k_island or not 0 <= k_island <= theta:
        raise ValueError(f"k_island must be an integer in [0, {theta}], got {k_island}")
    if not 0 < psi_base <= 1:
        raise ValueError(f"psi_base must lie in (0, 1], got {psi_base}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if k_island == 0:
        w = np.ones((grid.T, grid.K, 1), dtype=np.int8)
        return ScenarioSet(w, np.array([1.0]), np.array([0]), np.array([0]))
    if psi_base >= 1:
        raise ValueError("islanding scenarios need psi_base < 1")

    starts = list(range(1, theta + 1, stride))
    S = 1 + len(starts)
    flat = np.ones((theta, S), dtype=np.int8)
    lengths = [0]
    for s, p in enumerate(starts, start=1):
        end = min(p + k_island - 1, theta)
        flat[p - 1:end, s] = 0
        lengths.append(end - p + 1)
    psi = np.full(S, (1.0 - psi_base) / len(starts))
    psi[0] = psi_base
    w = flat.reshape(grid.T, grid.K, S)
    return ScenarioSet(w, psi, np.array([0] + starts), np.array(lengths))


def scenario_rows(scen: ScenarioSet) -> list[tuple[int, float, int, int]]:
    """``(s, psi, start, length)`` records for CSV dumps."""
    return [(s, float(scen.psi[s]), int(scen.start[s]), int(scen.length[s])) for s in range(scen.S)]
