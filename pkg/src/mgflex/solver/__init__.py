from .bnb import THREADS_ENV, SolveOptions, solve_milp
from .lp import FAILED, INFEASIBLE, LIMIT, OPTIMAL, UNBOUNDED, SolveResult, infeasibility_hint, solve_lp
from .simplex import LPOutcome, dual_simplex

__all__ = [
    "THREADS_ENV", "SolveOptions", "solve_milp", "SolveResult", "solve_lp", "infeasibility_hint",
    "LPOutcome", "dual_simplex", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "LIMIT", "FAILED",
]
