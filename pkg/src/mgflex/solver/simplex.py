"""Bounded-variable dual revised simplex.

Solves ``min c @ x`` s.t. ``row_lo <= A x <= row_hi`` and ``lb <= x <= ub``.
Each row gets a logical variable ``r = A x`` carrying the row bounds, so the
system is ``[A, -I] y = 0`` with every variable boxed. Starting from the
all-logical basis, nonbasic structurals sit at the bound that makes their
reduced cost dual feasible; missing bounds are replaced by a large
artificial box and a solution resting on that box is reported unbounded.

The basis inverse is kept explicitly and updated by rank-one pivots, with a
fresh inversion every ``refactor`` iterations. That is fine for the small
dense problems this engine is meant for (oracle checks, tiny models).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

BIG = 1e7


@dataclass
class LPOutcome:
    status: str  # optimal | infeasible | unbounded | limit | numerical
    x: Optional[np.ndarray]
    objective: float
    iterations: int = 0
    reduced_costs: Optional[np.ndarray] = None
    message: str = ""


def dual_simplex(c, A, row_lo, row_hi, lb, ub, *, feas_tol=1e-9, pivot_tol=1e-9,
                 max_iter=None, degenerate_limit=50, refactor=50) -> LPOutcome:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    m, n = A.shape
    if m == 0:
        A = np.zeros((0, n))
    N = n + m
    # columns of the augmented matrix [A, -I] are never formed explicitly
    cost = np.concatenate([c, np.zeros(m)])
    lo = np.concatenate([np.asarray(lb, float), np.asarray(row_lo, float)])
    hi = np.concatenate([np.asarray(ub, float), np.asarray(row_hi, float)])
    if np.any(lo > hi + feas_tol):
        return LPOutcome("infeasible", None, np.nan, message="a variable or row has lower > upper bound")

    # artificial box wherever a bound is missing
    artificial = ~np.isfinite(lo) | ~np.isfinite(hi)
    lo_w = np.where(np.isfinite(lo), lo, -BIG)
    hi_w = np.where(np.isfinite(hi), hi, BIG)

    def times(v):
        """``[A, -I] @ v``."""
        return A @ v[:n] - v[n:]

    def row_times(w):
        """``w @ [A, -I]``."""
        return np.concatenate([w @ A, -w])

    def column(j):
        if j < n:
            return A[:, j]
        e = np.zeros(m)
        e[j - n] = -1.0
        return e

    basis = np.arange(n, N)
    is_basic = np.zeros(N, dtype=bool)
    is_basic[basis] = True
    at_upper = np.zeros(N, dtype=bool)
    at_upper[:n] = cost[:n] < 0
    Binv = -np.eye(m)
    max_iter = max_iter or 50 * (m + n) + 1000
    degenerate_run = 0
    bland = False
    d = None

    for it in range(max_iter):
        if it and it % refactor == 0:
            try:
                Binv = np.linalg.inv(np.column_stack([column(j) for j in basis]))
            except np.linalg.LinAlgError:
                return LPOutcome("numerical", None, np.nan, it, message="singular basis")
            d = None
        if d is None:
            d = cost - row_times(cost[basis] @ Binv)
            d[basis] = 0.0

        # bound flips restore dual feasibility of boxed nonbasics
        nb = ~is_basic
        wrong = nb & ((~at_upper & (d < -feas_tol)) | (at_upper & (d > feas_tol)))
        at_upper[wrong] = ~at_upper[wrong]

        xval = np.where(at_upper, hi_w, lo_w)
        xval[basis] = 0.0
        xB = -Binv @ times(xval)
        lB, uB = lo_w[basis], hi_w[basis]
        scale = 1.0 + np.abs(xB)
        below = (lB - xB) > feas_tol * scale
        above = (xB - uB) > feas_tol * scale
        infeasible = np.flatnonzero(below | above)

        if infeasible.size == 0:
            x_full = xval
            x_full[basis] = xB
            x = x_full[:n]
            if np.any(artificial & (np.abs(x_full) >= BIG * (1 - 1e-9))):
                return LPOutcome("unbounded", None, -np.inf, it, message="solution rests on the artificial box")
            return LPOutcome("optimal", x.copy(), float(c @ x), it, reduced_costs=d[:n].copy())

        if bland:
            r = infeasible[np.argmin(basis[infeasible])]
        else:
            viol = np.maximum(lB - xB, xB - uB)
            r = infeasible[np.argmax(viol[infeasible] / scale[infeasible])]
        leaving_low = bool(below[r])

        alpha = row_times(Binv[r])
        movable = nb & (hi_w > lo_w)
        if leaving_low:
            cand = movable & ((~at_upper & (alpha < -pivot_tol)) | (at_upper & (alpha > pivot_tol)))
        else:
            cand = movable & ((~at_upper & (alpha > pivot_tol)) | (at_upper & (alpha < -pivot_tol)))
        idx = np.flatnonzero(cand)
        if idx.size == 0:
            return LPOutcome("infeasible", None, np.nan, it, message=f"row {r} cannot be repaired")
        ratios = np.abs(d[idx]) / np.abs(alpha[idx])
        best = ratios.min()
        ties = idx[ratios <= best + 1e-12]
        if bland:
            q = int(ties.min())
        else:
            q = int(ties[np.argmax(np.abs(alpha[ties]))])

        degenerate_run = degenerate_run + 1 if best <= 1e-12 else 0
        if degenerate_run > degenerate_limit:
            bland = True

        leaving = basis[r]
        col = Binv @ column(q)
        piv = col[r]
        if abs(piv) < pivot_tol:
            return LPOutcome("numerical", None, np.nan, it, message="pivot too small")
        d = d - (d[q] / alpha[q]) * alpha
        d[q] = 0.0
        pivot_row = Binv[r] / piv
        Binv -= np.outer(col, pivot_row)
        Binv[r] = pivot_row

        basis[r] = q
        is_basic[q] = True
        is_basic[leaving] = False
        at_upper[leaving] = not leaving_low
        at_upper[q] = False

    return LPOutcome("limit", None, np.nan, max_iter, message="iteration limit")
