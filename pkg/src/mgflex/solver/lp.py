"""LP relaxations of a :class:`MilpModel` through interchangeable engines.

``native`` is the in-house dual simplex (dense; small models only).
``highs`` delegates to a persistent HiGHS model through ``highspy``.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Optional

import highspy
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..model import MilpModel
from .simplex import LPOutcome, dual_simplex

OPTIMAL = "optimal-within-gap"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit-reached"
FAILED = "numerical-failure"


@dataclass
class SolveResult:
    status: str
    objective: float
    bound: float
    x: Optional[np.ndarray]
    nodes: int = 0
    wall_time: float = 0.0
    root_bound: Optional[float] = None
    message: str = ""
    hint: Optional[str] = None
    log: list = field(default_factory=list)
    incumbents: list = field(default_factory=list)  # column vectors of every improving solution

    @property
    def gap(self) -> float:
        if self.x is None or not np.isfinite(self.bound):
            return np.inf
        return max(0.0, self.objective - self.bound) / max(abs(self.objective), 1e-10)


class HighsEngine:
    """One persistent HiGHS LP per thread; calls only change column bounds.

    Re-solves start from the previous basis (dual simplex), which is what
    makes node LPs cheap. Results do not depend on that basis beyond the
    choice among alternative optima.
    """

    def __init__(self, model: MilpModel, feas_tol: float = 1e-9, time_limit: Optional[float] = None):
        self.model = model
        self.feas_tol = feas_tol
        self.time_limit = time_limit
        self._local = threading.local()

    def _solver(self):
        h = getattr(self._local, "highs", None)
        if h is not None:
            return h
        m = self.model
        A = sp.csc_matrix(m.A)
        lo, hi = m.row_bounds
        lp = highspy.HighsLp()
        lp.num_col_, lp.num_row_ = m.n_cols, m.n_rows
        lp.col_cost_ = m.c
        lp.col_lower_, lp.col_upper_ = m.lb, m.ub
        lp.row_lower_, lp.row_upper_ = lo, hi
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("primal_feasibility_tolerance", self.feas_tol)
        h.setOptionValue("dual_feasibility_tolerance", self.feas_tol)
        if self.time_limit is not None:
            h.setOptionValue("time_limit", float(self.time_limit))
        h.passModel(lp)
        self._local.highs = h
        self._local.cols = np.arange(m.n_cols, dtype=np.int32)
        return h

    def __call__(self, lb: np.ndarray, ub: np.ndarray) -> LPOutcome:
        h = self._solver()
        cols = self._local.cols
        h.changeColsBounds(len(cols), cols, np.asarray(lb, dtype=float), np.asarray(ub, dtype=float))
        h.run()
        status = h.getModelStatus()
        iters = int(h.getInfo().simplex_iteration_count)
        if status == highspy.HighsModelStatus.kOptimal:
            x = np.array(h.getSolution().col_value)
            return LPOutcome("optimal", x, float(self.model.c @ x), iters)
        name = {highspy.HighsModelStatus.kInfeasible: "infeasible",
                highspy.HighsModelStatus.kUnbounded: "unbounded",
                highspy.HighsModelStatus.kTimeLimit: "limit",
                highspy.HighsModelStatus.kIterationLimit: "limit"}.get(status, "numerical")
        if name == "numerical":
            # a stale basis can trip the hot start; retry once from scratch
            h.clearSolver()
            h.run()
            if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
                x = np.array(h.getSolution().col_value)
                return LPOutcome("optimal", x, float(self.model.c @ x), iters)
        return LPOutcome(name, None, np.nan, iters, message=h.modelStatusToString(status))


class NativeEngine:
    def __init__(self, model: MilpModel, feas_tol: float = 1e-9):
        self.c = model.c
        self.A = model.A.toarray()
        self.row_lo, self.row_hi = model.row_bounds
        self.feas_tol = feas_tol

    def __call__(self, lb: np.ndarray, ub: np.ndarray) -> LPOutcome:
        return dual_simplex(self.c, self.A, self.row_lo, self.row_hi, lb, ub, feas_tol=self.feas_tol)


ENGINES = {"highs": HighsEngine, "native": NativeEngine}


def make_engine(model: MilpModel, backend: str = "highs", feas_tol: float = 1e-9):
    try:
        return ENGINES[backend](model, feas_tol=feas_tol)
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}; choose from {sorted(ENGINES)}") from None


def solve_lp(model: MilpModel, backend: str = "highs", lb=None, ub=None, feas_tol: float = 1e-9) -> SolveResult:
    """Solve the LP relaxation (binaries relaxed to their [lb, ub] box)."""
    start = time.perf_counter()
    engine = make_engine(model, backend, feas_tol)
    out = engine(model.lb if lb is None else lb, model.ub if ub is None else ub)
    elapsed = time.perf_counter() - start
    if out.status == "optimal":
        obj = out.objective + model.obj_offset
        return SolveResult(OPTIMAL, obj, obj, out.x, wall_time=elapsed, root_bound=obj)
    status = {"infeasible": INFEASIBLE, "unbounded": UNBOUNDED, "limit": LIMIT}.get(out.status, FAILED)
    bound = -np.inf if status == UNBOUNDED else np.inf if status == INFEASIBLE else np.nan
    return SolveResult(status, np.nan, bound, None, wall_time=elapsed, message=out.message)


def infeasibility_hint(model: MilpModel, lb=None, ub=None) -> Optional[str]:
    """Name the first row family that needs elastic slack to become feasible.

    Every row gets nonnegative slack in each violated direction and total
    slack is minimized; the first row (in model order) with positive slack
    names the family.
    """
    lb = model.lb if lb is None else lb
    ub = model.ub if ub is None else ub
    m, n = model.A.shape
    lo, hi = model.row_bounds
    # A x + s_plus - s_minus within [lo, hi]
    eye = sp.identity(m, format="csr")
    A_el = sp.hstack([model.A, eye, -eye]).tocsr()
    c_el = np.concatenate([np.zeros(n), np.ones(2 * m)])
    le = np.isfinite(hi)
    ge = np.isfinite(lo) & (model.sense != "E")
    eq = model.sense == "E"
    A_ub = sp.vstack([A_el[le & ~eq], -A_el[ge]]).tocsr()
    b_ub = np.concatenate([hi[le & ~eq], -lo[ge]])
    bounds = np.column_stack([np.concatenate([lb, np.zeros(2 * m)]),
                              np.concatenate([ub, np.full(2 * m, np.inf)])])
    res = linprog(c_el, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_el[eq] if eq.any() else None, b_eq=model.rhs[eq] if eq.any() else None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return None
    slack = res.x[n:n + m] + res.x[n + m:]
    bad = np.flatnonzero(slack > 1e-7)
    if bad.size == 0:
        return None
    i = int(bad[0])
    family = model.row_family[i] if model.row_family else model.row_names[i]
    return f"{family} (first row {model.row_names[i]}, {bad.size} rows need slack)"
