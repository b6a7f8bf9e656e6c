"""Best-first branch-and-bound on LP relaxations.

Node order is best bound with ties broken by node id; branching picks the
most fractional integer variable with ties broken by variable id. Each
node re-solves its LP from scratch (no warm starts). A generic rounding
pass tries to complete fractional relaxations into feasible integer
points, which closes zero-cost indicator variables without branching.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from ..constants import FEASIBILITY_TOL, INTEGRALITY_TOL, MIP_GAP
from ..model import Arrays
from .simplex import LpSolution, solve_simplex


@dataclass
class MilpSolution:
    status: str               # optimal | infeasible | unbounded | iteration_limit
    objective: float
    x: np.ndarray
    duals: np.ndarray
    iterations: int           # total simplex iterations
    nodes: int
    gap: float


def _row_ok(activity: float, sense: int, rhs: float, tol: float) -> bool:
    if sense == 0:
        return activity <= rhs + tol
    if sense == 2:
        return activity >= rhs - tol
    return abs(activity - rhs) <= tol


def round_to_feasible(arrays: Arrays, x: np.ndarray, lb: np.ndarray,
                      ub: np.ndarray
                      ) -> tuple[np.ndarray | None, list[int]]:
    """Round integer variables, accepting a move only if every row touching
    the variable stays feasible at current values. Multiple passes let
    coupled indicators settle (a partner status may need to round down
    before its mate can round up). Returns (point, stuck) where point is
    None if some variable could not be rounded; stuck lists those ids."""
    a_csc = arrays.A.tocsc()
    act = arrays.A @ x
    xr = x.copy()
    tol = FEASIBILITY_TOL * (1.0 + float(np.abs(arrays.b).max(initial=0.0)))

    def try_round(j: int, sides: tuple[float, ...]) -> bool:
        start, end = a_csc.indptr[j], a_csc.indptr[j + 1]
        rows = a_csc.indices[start:end]
        vals = a_csc.data[start:end]
        for cand in sides:
            if not (lb[j] - 1e-9 <= cand <= ub[j] + 1e-9):
                continue
            delta = cand - xr[j]
            new_act = act[rows] + vals * delta
            if all(_row_ok(new_act[k], arrays.senses[r], arrays.b[r], tol)
                   for k, r in enumerate(rows)):
                act[rows] = new_act
                xr[j] = cand
                return True
        return False

    pending = [int(j) for j in np.flatnonzero(arrays.int_mask)
               if abs(xr[j] - round(xr[j])) > INTEGRALITY_TOL]
    snapped = [int(j) for j in np.flatnonzero(arrays.int_mask)
               if abs(xr[j] - round(xr[j])) <= INTEGRALITY_TOL]
    for j in snapped:
        try_round(j, (float(round(xr[j])),))
    # nearest-side passes until a fixed point, then a strict both-sides pass
    for _ in range(3):
        still = [j for j in pending if not try_round(j, (float(round(xr[j])),))]
        if len(still) == len(pending):
            break
        pending = still
        if not pending:
            break
    stuck = []
    for j in pending:
        base = float(round(xr[j]))
        other = base + 1.0 if xr[j] > base else base - 1.0
        if not try_round(j, (base, other)):
            stuck.append(j)
    if stuck:
        return None, stuck
    resid = arrays.A @ xr
    for i in range(len(arrays.b)):
        if not _row_ok(resid[i], arrays.senses[i], arrays.b[i], tol):
            return None, []
    if ((xr < lb - 1e-9) | (xr > ub + 1e-9)).any():
        return None, []
    return xr, []


def solve_branch_bound(arrays: Arrays, gap: float = MIP_GAP,
                       time_limit: float | None = None,
                       node_limit: int | None = None) -> MilpSolution:
    int_cols = np.flatnonzero(arrays.int_mask)
    t0 = time.monotonic()
    total_iters = 0

    root = solve_simplex(arrays)
    total_iters += root.iterations
    if root.status in ("infeasible", "unbounded", "iteration_limit"):
        return MilpSolution(root.status, root.objective, root.x,
                            root.duals, total_iters, 1, math.inf)
    if int_cols.size == 0:
        return MilpSolution("optimal", root.objective, root.x, root.duals,
                            total_iters, 1, 0.0)

    lb0, ub0 = arrays.lb.copy(), arrays.ub.copy()
    incumbent_obj = math.inf
    incumbent_x: np.ndarray | None = None
    node_id = 0
    nodes_processed = 0
    # heap holds (parent bound, node id, lb overrides, ub overrides)
    heap: list[tuple[float, int, dict, dict]] = [(root.objective, 0, {}, {})]
    hit_limit = False

    def current_gap() -> float:
        if incumbent_x is None:
            return math.inf
        lbound = heap[0][0] if heap else incumbent_obj
        return (incumbent_obj - lbound) / max(1.0, abs(incumbent_obj))

    while heap:
        if current_gap() <= gap:
            break
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            hit_limit = True
            break
        if node_limit is not None and nodes_processed >= node_limit:
            hit_limit = True
            break
        bound, nid, lo_over, up_over = heapq.heappop(heap)
        if bound >= incumbent_obj - 1e-12:
            continue
        lb, ub = lb0.copy(), ub0.copy()
        for j, v in lo_over.items():
            lb[j] = v
        for j, v in up_over.items():
            ub[j] = v
        if nid == 0:
            sol = root  # already solved
        else:
            sol = solve_simplex(arrays, lb=lb, ub=ub)
            total_iters += sol.iterations
        nodes_processed += 1
        if sol.status != "optimal":
            continue
        if sol.objective >= incumbent_obj - 1e-12:
            continue

        frac = np.abs(sol.x[int_cols] - np.round(sol.x[int_cols]))
        if frac.size == 0 or frac.max() <= INTEGRALITY_TOL:
            x_int = sol.x.copy()
            x_int[int_cols] = np.round(x_int[int_cols])
            obj = float(arrays.c @ x_int) + arrays.obj_const
            if obj < incumbent_obj - 1e-12:
                incumbent_obj, incumbent_x = obj, x_int
            continue

        rounded, stuck = round_to_feasible(arrays, sol.x, lb, ub)
        if rounded is not None:
            obj = float(arrays.c @ rounded) + arrays.obj_const
            if obj < incumbent_obj - 1e-12:
                incumbent_obj, incumbent_x = obj, rounded
            if obj <= sol.objective + 1e-9:
                continue  # node solved exactly by the rounding pass

        # most fractional, ties by variable id; prefer the variables the
        # rounding pass could not settle (branching elsewhere cannot move
        # the node toward integer feasibility)
        dist = np.minimum(frac, 1.0 - frac)
        scores = np.where(dist > INTEGRALITY_TOL, dist, -1.0)
        if stuck:
            stuck_set = set(stuck)
            pref = np.array([1.0 if c in stuck_set else 0.0
                             for c in int_cols])
            if (scores[pref > 0] > 0).any():
                scores = np.where(pref > 0, scores, -1.0)
        j = int(int_cols[int(np.argmax(scores))])
        xj = sol.x[j]
        down_up = dict(up_over)
        down_up[j] = math.floor(xj + INTEGRALITY_TOL)
        up_lo = dict(lo_over)
        up_lo[j] = math.ceil(xj - INTEGRALITY_TOL)
        node_id += 1
        heapq.heappush(heap, (sol.objective, node_id, dict(lo_over), down_up))
        node_id += 1
        heapq.heappush(heap, (sol.objective, node_id, up_lo, dict(up_over)))

    if incumbent_x is None:
        status = "iteration_limit" if hit_limit else "infeasible"
        return MilpSolution(status, math.nan, np.zeros(arrays.c.shape),
                            np.zeros(len(arrays.b)), total_iters,
                            nodes_processed, math.inf)

    achieved = current_gap() if (heap and hit_limit) else 0.0
    status = "iteration_limit" if (hit_limit and achieved > gap) else "optimal"
    # duals from the LP with integers fixed at the incumbent
    lb, ub = lb0.copy(), ub0.copy()
    lb[int_cols] = incumbent_x[int_cols]
    ub[int_cols] = incumbent_x[int_cols]
    fixed = solve_simplex(arrays, lb=lb, ub=ub)
    total_iters += fixed.iterations
    duals = fixed.duals if fixed.status == "optimal" else np.zeros(len(arrays.b))
    x_out = fixed.x if fixed.status == "optimal" else incumbent_x
    obj = (fixed.objective if fixed.status == "optimal" else incumbent_obj)
    return MilpSolution(status, obj, x_out, duals, total_iters,
                        nodes_processed, achieved)
