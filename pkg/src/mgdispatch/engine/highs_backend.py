"""scipy (HiGHS) backend behind the same solve contract as the built-in
engine. Used by default for instances too large for the from-scratch
simplex; also serves as the external cross-check solver in tests."""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from ..constants import MIP_GAP
from ..model import Arrays
from .branch_bound import MilpSolution
from .simplex import LpSolution

_LP_STATUS = {0: "optimal", 1: "iteration_limit", 2: "infeasible",
              3: "unbounded"}
_MILP_STATUS = {0: "optimal", 1: "iteration_limit", 2: "infeasible",
                3: "unbounded", 4: "iteration_limit"}


def _bounds_list(lb: np.ndarray, ub: np.ndarray) -> list[tuple]:
    return [(None if not math.isfinite(lo) else lo,
             None if not math.isfinite(hi) else hi)
            for lo, hi in zip(lb, ub)]


def solve_lp_highs(arrays: Arrays, lb: np.ndarray | None = None,
                   ub: np.ndarray | None = None) -> LpSolution:
    lb = arrays.lb if lb is None else lb
    ub = arrays.ub if ub is None else ub
    a = arrays.A.tocsr()
    le = np.flatnonzero(arrays.senses == 0)
    eq = np.flatnonzero(arrays.senses == 1)
    ge = np.flatnonzero(arrays.senses == 2)
    a_ub = sp.vstack([a[le], -a[ge]], format="csr") if (le.size or ge.size) else None
    b_ub = np.concatenate([arrays.b[le], -arrays.b[ge]]) if a_ub is not None else None
    a_eq = a[eq] if eq.size else None
    b_eq = arrays.b[eq] if eq.size else None
    res = linprog(arrays.c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=_bounds_list(lb, ub), method="highs")
    status = _LP_STATUS.get(res.status, "iteration_limit")
    n = len(arrays.c)
    m = len(arrays.b)
    if status != "optimal":
        return LpSolution(status, math.nan, np.zeros(n), np.zeros(m),
                          np.zeros(n), int(getattr(res, "nit", 0) or 0),
                          math.nan)
    duals = np.zeros(m)
    if a_ub is not None:
        marg = np.asarray(res.ineqlin.marginals)
        duals[le] = marg[:le.size]
        duals[ge] = -marg[le.size:]
    if a_eq is not None:
        duals[eq] = np.asarray(res.eqlin.marginals)
    x = np.asarray(res.x)
    obj = float(res.fun) + arrays.obj_const
    reduced = arrays.c - arrays.A.T @ duals
    nb_low = np.isfinite(lb) & (np.abs(x - lb) < 1e-9)
    nb_up = np.isfinite(ub) & (np.abs(x - ub) < 1e-9)
    dual_obj = float(arrays.b @ duals
                     + np.where(nb_low, reduced * np.where(np.isfinite(lb), lb, 0.0),
                                np.where(nb_up, reduced * np.where(np.isfinite(ub), ub, 0.0),
                                         0.0)).sum()) + arrays.obj_const
    return LpSolution("optimal", obj, x, duals, reduced,
                      int(getattr(res, "nit", 0) or 0), dual_obj)


def solve_milp_highs(arrays: Arrays, gap: float = MIP_GAP,
                     time_limit: float | None = None,
                     lb: np.ndarray | None = None,
                     ub: np.ndarray | None = None) -> MilpSolution:
    lb = arrays.lb if lb is None else lb
    ub = arrays.ub if ub is None else ub
    n = len(arrays.c)
    m = len(arrays.b)
    if not arrays.int_mask.any():
        s = solve_lp_highs(arrays, lb, ub)
        return MilpSolution(s.status, s.objective, s.x, s.duals,
                            s.iterations, 1, 0.0 if s.status == "optimal" else math.inf)
    cons = []
    if m:
        lo = np.where(arrays.senses == 2, arrays.b, -np.inf)
        lo = np.where(arrays.senses == 1, arrays.b, lo)
        hi = np.where(arrays.senses == 0, arrays.b, np.inf)
        hi = np.where(arrays.senses == 1, arrays.b, hi)
        cons.append(LinearConstraint(arrays.A, lo, hi))
    options = {"mip_rel_gap": gap, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(arrays.c, constraints=cons,
               bounds=Bounds(lb, ub),
               integrality=arrays.int_mask.astype(int), options=options)
    status = _MILP_STATUS.get(res.status, "iteration_limit")
    if res.x is None:
        return MilpSolution(status, math.nan, np.zeros(n), np.zeros(m),
                            0, int(getattr(res, "mip_node_count", 0) or 0),
                            math.inf)
    x = np.asarray(res.x)
    # duals and polished continuous part from the fixed-integer LP
    lb2, ub2 = lb.copy(), ub.copy()
    ints = np.flatnonzero(arrays.int_mask)
    lb2[ints] = np.round(x[ints])
    ub2[ints] = np.round(x[ints])
    fixed = solve_lp_highs(arrays, lb2, ub2)
    if fixed.status == "optimal":
        out_x, out_obj, duals = fixed.x, fixed.objective, fixed.duals
    else:
        out_x, out_obj, duals = x, float(res.fun) + arrays.obj_const, np.zeros(m)
    achieved = float(getattr(res, "mip_gap", 0.0) or 0.0)
    return MilpSolution(status, out_obj, out_x, duals, 0,
                        int(getattr(res, "mip_node_count", 0) or 0), achieved)
