"""Desk-scale exact MILP engine.

The built-in solver (bounded-variable primal simplex plus best-first
branch-and-bound) is the default for small instances and the reference for
determinism tests; instances above AUTO_BACKEND_THRESHOLD rows+columns are
routed to the scipy (HiGHS) backend behind the same contract. Either way
one solve is single threaded and deterministic; independent solves share
no mutable state.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..constants import (AUTO_BACKEND_THRESHOLD, FEASIBILITY_TOL,
                         INTEGRALITY_TOL, MIP_GAP)
from ..model import Arrays, MilpProblem
from .branch_bound import MilpSolution, solve_branch_bound
from .highs_backend import solve_lp_highs, solve_milp_highs
from .lp_format import parse_lp, write_lp
from .simplex import LpSolution, solve_simplex

__all__ = ["SolveResult", "FeasibilityReport", "solve_lp", "solve_milp",
           "check_feasibility", "export_lp_file", "parse_lp", "write_lp",
           "pick_backend"]


@dataclass
class SolveResult:
    status: str                  # optimal | infeasible | unbounded | iteration_limit
    objective: float
    primal: np.ndarray           # one value per model variable
    duals: np.ndarray            # one value per constraint
    iterations: int = 0
    nodes: int = 0
    wall_time: float = 0.0
    gap: float = 0.0
    dual_objective: float = math.nan
    backend: str = "simplex"

    def value(self, var_id: int) -> float:
        return float(self.primal[var_id])


@dataclass
class FeasibilityReport:
    max_constraint_violation: float
    max_bound_violation: float
    max_integrality_violation: float
    worst_constraint: str = ""

    @property
    def max_violation(self) -> float:
        return max(self.max_constraint_violation, self.max_bound_violation,
                   self.max_integrality_violation)


def pick_backend(problem_or_arrays, backend: str = "auto") -> str:
    if backend != "auto":
        return backend
    if isinstance(problem_or_arrays, MilpProblem):
        size = problem_or_arrays.n_vars + problem_or_arrays.n_cons
    else:
        size = problem_or_arrays.A.shape[0] + problem_or_arrays.A.shape[1]
    return "simplex" if size <= AUTO_BACKEND_THRESHOLD else "highs"


def _as_arrays(problem: MilpProblem | Arrays) -> Arrays:
    if isinstance(problem, MilpProblem):
        problem.validate()
        return problem.to_arrays()
    return problem


def solve_lp(problem: MilpProblem | Arrays, backend: str = "auto",
             iteration_limit: int | None = None) -> SolveResult:
    """Solve the LP relaxation (integrality flags ignored)."""
    arrays = _as_arrays(problem)
    chosen = pick_backend(arrays, backend)
    t0 = time.monotonic()
    if chosen == "highs":
        sol = solve_lp_highs(arrays)
    else:
        sol = solve_simplex(arrays, iteration_limit=iteration_limit)
    wall = time.monotonic() - t0
    return SolveResult(sol.status, sol.objective, sol.x, sol.duals,
                       iterations=sol.iterations, wall_time=wall,
                       dual_objective=sol.dual_objective, backend=chosen)


def solve_milp(problem: MilpProblem | Arrays, gap: float = MIP_GAP,
               time_limit: float | None = None,
               backend: str = "auto") -> SolveResult:
    arrays = _as_arrays(problem)
    chosen = pick_backend(arrays, backend)
    t0 = time.monotonic()
    if chosen == "highs":
        sol = solve_milp_highs(arrays, gap=gap, time_limit=time_limit)
    else:
        sol = solve_branch_bound(arrays, gap=gap, time_limit=time_limit)
    wall = time.monotonic() - t0
    return SolveResult(sol.status, sol.objective, sol.x, sol.duals,
                       iterations=sol.iterations, nodes=sol.nodes,
                       wall_time=wall, gap=sol.gap, backend=chosen)


def check_feasibility(problem: MilpProblem | Arrays, x: np.ndarray,
                      names: list[str] | None = None) -> FeasibilityReport:
    """Residuals of an assignment: constraints, bounds, integrality."""
    arrays = _as_arrays(problem)
    x = np.asarray(x, dtype=float)
    act = arrays.A @ x
    viol = np.zeros(len(arrays.b))
    le = arrays.senses == 0
    ge = arrays.senses == 2
    eq = arrays.senses == 1
    viol[le] = act[le] - arrays.b[le]
    viol[ge] = arrays.b[ge] - act[ge]
    viol[eq] = np.abs(act[eq] - arrays.b[eq])
    np.clip(viol, 0.0, None, out=viol)
    worst = ""
    max_c = 0.0
    if viol.size:
        i = int(np.argmax(viol))
        max_c = float(viol[i])
        if isinstance(problem, MilpProblem):
            worst = problem.constraints[i].name
        elif names:
            worst = names[i]
    lo = np.where(np.isfinite(arrays.lb), arrays.lb - x, 0.0)
    hi = np.where(np.isfinite(arrays.ub), x - arrays.ub, 0.0)
    max_b = float(max(np.clip(lo, 0.0, None).max(initial=0.0),
                      np.clip(hi, 0.0, None).max(initial=0.0)))
    ints = arrays.int_mask
    max_i = float(np.abs(x[ints] - np.round(x[ints])).max(initial=0.0))
    return FeasibilityReport(max_c, max_b, max_i, worst)


def export_lp_file(problem: MilpProblem, path: str) -> None:
    """Write the model in LP interchange format (see lp_format)."""
    write_lp(problem, path)
