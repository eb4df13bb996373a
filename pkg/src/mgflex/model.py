"""Sparse MILP container and the column <-> semantic coordinate index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

# Column ordering: symbols sort in this order, then by owner, t, k, s.
SYMBOL_ORDER = ("I", "u", "v", "z", "SUvar", "SDvar", "P", "seg", "Pdch", "Pch", "C", "D", "PM", "LS")
BINARY_SYMBOLS = frozenset({"I", "u", "v", "z"})
SCENARIO_FREE = frozenset({"I", "u", "v", "z", "D", "seg", "SUvar", "SDvar"})


def coord_name(prefix: str, owner: str = "", t=None, k=None, s=None) -> str:
    """Readable identifier such as ``P_g1_t4_k2_s0``."""
    parts = [prefix]
    if owner:
        parts.append(owner.replace("#", "_"))
    for label, v in (("t", t), ("k", k), ("s", s)):
        if v is not None:
            parts.append(f"{label}{v}")
    return "_".join(parts)


class VarKey(NamedTuple):
    """Semantic coordinate of a column. Hours/sub-periods are 1-based; absent indices are None.

    ``owner`` is the component id; for ``seg`` it is ``"<unit>#<segment>"``.
    """

    symbol: str
    owner: str = ""
    t: Optional[int] = None
    k: Optional[int] = None
    s: Optional[int] = None

    def sort_key(self):
        return (SYMBOL_ORDER.index(self.symbol), self.owner,
                -1 if self.t is None else self.t,
                -1 if self.k is None else self.k,
                -1 if self.s is None else self.s)

    @property
    def name(self) -> str:
        return coord_name(self.symbol, self.owner, self.t, self.k, self.s)


class VariableIndex:
    """Bijective map between column numbers and :class:`VarKey` coordinates."""

    def __init__(self, keys):
        self.keys: list[VarKey] = list(keys)
        self._col = {key: j for j, key in enumerate(self.keys)}
        if len(self._col) != len(self.keys):
            raise ValueError("duplicate variable keys")

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self._col

    def __iter__(self) -> Iterator[VarKey]:
        return iter(self.keys)

    def col(self, key: VarKey) -> int:
        return self._col[key]

    def get(self, key: VarKey, default=None):
        return self._col.get(key, default)

    def key(self, col: int) -> VarKey:
        return self.keys[col]

    def columns(self, symbol: str, owner: Optional[str] = None) -> list[int]:
        return [j for j, key in enumerate(self.keys)
                if key.symbol == symbol and (owner is None or key.owner == owner)]

    @property
    def names(self) -> list[str]:
        return [key.name for key in self.keys]


@dataclass
class MilpModel:
    """``min c @ x + obj_offset`` subject to ``A x (sense) rhs`` and ``lb <= x <= ub``.

    ``sense`` holds one of ``"L"`` (<=), ``"E"`` (=), ``"G"`` (>=) per row.
    Binary columns are flagged in ``binary``.
    """

    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    col_names: list[str]
    row_names: list[str]
    obj_offset: float = 0.0
    row_family: list[str] = field(default_factory=list)
    name: str = "MODEL"

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @property
    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows as ``lo <= A x <= hi``."""
        lo = np.where(self.sense == "L", -np.inf, self.rhs)
        hi = np.where(self.sense == "G", np.inf, self.rhs)
        return lo, hi

    def stats(self) -> dict:
        return {
            "rows": int(self.n_rows),
            "columns": int(self.n_cols),
            "nonzeros": int(self.A.nnz),
            "binaries": int(np.count_nonzero(self.binary)),
        }

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.obj_offset)

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        ax = self.A @ x
        lo, hi = self.row_bounds
        viol = [np.max(np.maximum(lo - ax, 0.0), initial=0.0),
                np.max(np.maximum(ax - hi, 0.0), initial=0.0),
                np.max(np.maximum(self.lb - x, 0.0), initial=0.0),
                np.max(np.maximum(x - self.ub, 0.0), initial=0.0)]
        return float(max(viol))

    def check(self):
        """Raise ValueError if the model breaks its structural invariants."""
        n = self.n_cols
        for name, arr in (("c", self.c), ("lb", self.lb), ("ub", self.ub), ("binary", self.binary)):
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
        m = self.n_rows
        for name, arr in (("sense", self.sense), ("rhs", self.rhs)):
            if arr.shape != (m,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({m},)")
        if len(self.col_names) != n or len(self.row_names) != m:
            raise ValueError("name lists do not match model dimensions")
        if not set(np.unique(self.sense)) <= {"L", "E", "G"}:
            raise ValueError("row sense must be L, E or G")
        empty = np.flatnonzero(np.diff(self.A.indptr) == 0)
        if empty.size:
            raise ValueError(f"empty row {self.row_names[empty[0]]!r}")
        b = self.binary
        if np.any(self.lb[b] < 0) or np.any(self.ub[b] > 1):
            raise ValueError("binary columns must have bounds within [0, 1]")
        if np.any(self.lb > self.ub):
            j = int(np.flatnonzero(self.lb > self.ub)[0])
            raise ValueError(f"column {self.col_names[j]!r} has lb > ub")
