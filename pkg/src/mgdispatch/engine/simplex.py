"""Bounded-variable revised primal simplex with dual extraction.

Rows are handled as equalities A x + s = b with one slack per row whose
bounds encode the sense (<=: s in [0, inf), =: s = 0, >=: s in (-inf, 0]).
Phase 1 minimizes the total bound violation of the basic variables
(composite method); phase 2 runs Dantzig pricing with a fall back to
Bland's rule after a streak of degenerate pivots. The basis inverse is a
sparse LU factorization plus product-form eta updates, refactorized on a
fixed interval, which keeps every run deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..constants import (DEGENERATE_STREAK, FEASIBILITY_TOL, PIVOT_TOL,
                         REFACTOR_INTERVAL)
from ..model import Arrays

AT_LOWER, AT_UPPER, FREE_NB, BASIC = 0, 1, 2, 3

_D_TOL = 1e-9          # reduced-cost threshold for entering candidates
_RATIO_TIE = 1e-9      # ratio-test tie window
_DEGEN_STEP = 1e-11    # step below which a pivot counts as degenerate


@dataclass
class LpSolution:
    status: str                    # optimal | infeasible | unbounded | iteration_limit
    objective: float
    x: np.ndarray                  # structural variables only
    duals: np.ndarray              # one per row, shadow-price convention
    reduced_costs: np.ndarray      # structural variables
    iterations: int
    dual_objective: float


class _Basis:
    """B^-1 as sparse LU plus eta updates, with deterministic refactorization."""

    def __init__(self, a_full: sp.csc_matrix, cols: np.ndarray):
        self.a_full = a_full
        self.refactor(cols)

    def refactor(self, cols: np.ndarray) -> None:
        m = self.a_full.shape[0]
        basis_matrix = self.a_full[:, cols].tocsc()
        self.lu = splu(basis_matrix.astype(float))
        self.etas: list[tuple[int, np.ndarray]] = []
        self._m = m

    def push_eta(self, r: int, w: np.ndarray) -> None:
        self.etas.append((r, w.copy()))

    def ftran(self, v: np.ndarray) -> np.ndarray:
        x = self.lu.solve(v)
        for r, w in self.etas:
            xr = x[r] / w[r]
            x = x - w * xr
            x[r] = xr
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        y = v.astype(float).copy()
        for r, w in reversed(self.etas):
            y[r] = (y[r] * (1.0 + w[r]) - w @ y) / w[r]
        return self.lu.solve(y, trans="T")


class Simplex:
    def __init__(self, arrays: Arrays, lb: np.ndarray | None = None,
                 ub: np.ndarray | None = None,
                 iteration_limit: int | None = None):
        a = arrays
        self.m, self.n = a.A.shape
        self.b = a.b.astype(float)
        lb = a.lb if lb is None else lb
        ub = a.ub if ub is None else ub

        # slack bounds encode the row sense
        s_lb = np.where(a.senses == 2, -np.inf, 0.0)
        s_ub = np.where(a.senses == 0, np.inf, 0.0)
        self.l = np.concatenate([lb.astype(float), s_lb])
        self.u = np.concatenate([ub.astype(float), s_ub])
        self.c = np.concatenate([a.c.astype(float), np.zeros(self.m)])
        self.obj_const = a.obj_const

        eye = sp.identity(self.m, format="csc")
        self.a_csc = sp.hstack([a.A.tocsc(), eye], format="csc")
        self.a_t_csr = self.a_csc.T.tocsr()
        self.total = self.n + self.m
        self.iteration_limit = (iteration_limit if iteration_limit is not None
                                else 40 * (self.m + self.n) + 10_000)
        self.iterations = 0

    # -- setup -----------------------------------------------------------

    def _initial_point(self) -> None:
        self.vstat = np.full(self.total, AT_LOWER, dtype=np.int8)
        self.x = np.zeros(self.total)
        for j in range(self.n):
            lj, uj = self.l[j], self.u[j]
            if math.isfinite(lj) and (not math.isfinite(uj) or abs(lj) <= abs(uj)):
                self.vstat[j], self.x[j] = AT_LOWER, lj
            elif math.isfinite(uj):
                self.vstat[j], self.x[j] = AT_UPPER, uj
            else:
                self.vstat[j], self.x[j] = FREE_NB, 0.0
        self.basis = np.arange(self.n, self.n + self.m)
        self.vstat[self.basis] = BASIC
        self.basis_pos = np.full(self.total, -1, dtype=np.int64)
        self.basis_pos[self.basis] = np.arange(self.m)
        self.lu = _Basis(self.a_csc, self.basis)
        self._recompute_basics()

    def _recompute_basics(self) -> None:
        nb = self.vstat != BASIC
        rhs = self.b - self.a_csc[:, nb] @ self.x[nb] if nb.any() else self.b.copy()
        self.x[self.basis] = self.lu.ftran(rhs)

    # -- pieces ----------------------------------------------------------

    def _phase1_cost_basic(self) -> tuple[np.ndarray, float]:
        xb = self.x[self.basis]
        below = self.l[self.basis] - xb
        above = xb - self.u[self.basis]
        infeas = (np.clip(below, 0.0, None).sum()
                  + np.clip(above, 0.0, None).sum())
        g = np.zeros(self.m)
        g[below > FEASIBILITY_TOL] = -1.0
        g[above > FEASIBILITY_TOL] = 1.0
        return g, float(infeas)

    def _column(self, q: int) -> np.ndarray:
        col = np.zeros(self.m)
        start, end = self.a_csc.indptr[q], self.a_csc.indptr[q + 1]
        col[self.a_csc.indices[start:end]] = self.a_csc.data[start:end]
        return col

    def _price(self, c_basic: np.ndarray, phase: int) -> np.ndarray:
        pi = self.lu.btran(c_basic)
        d = -(self.a_t_csr @ pi)
        if phase == 2:
            d += self.c
        self._pi = pi
        return d

    def _entering(self, d: np.ndarray, bland: bool) -> int:
        span = self.u - self.l
        lower = (self.vstat == AT_LOWER) & (d < -_D_TOL) & (span > 0)
        upper = (self.vstat == AT_UPPER) & (d > _D_TOL) & (span > 0)
        free = (self.vstat == FREE_NB) & (np.abs(d) > _D_TOL)
        cand = lower | upper | free
        if not cand.any():
            return -1
        idx = np.flatnonzero(cand)
        if bland:
            return int(idx[0])
        scores = np.abs(d[idx])
        return int(idx[int(np.argmax(scores))])

    def _ratio_test(self, q: int, sigma: float, w: np.ndarray, phase: int,
                    bland: bool = False) -> tuple[float, int, int]:
        """Return (theta, blocking_row, bound_code); row -1 means the
        entering variable flips to its opposite bound, code 0/1 = leaving
        variable lands on lower/upper."""
        delta = -sigma * w                      # x_B += delta * theta
        xb = self.x[self.basis]
        lb, ub = self.l[self.basis], self.u[self.basis]
        limits = np.full(self.m, np.inf)
        bound_code = np.zeros(self.m, dtype=np.int8)

        dec = delta < -PIVOT_TOL
        inc = delta > PIVOT_TOL
        if phase == 1:
            below = xb < lb - FEASIBILITY_TOL
            above = xb > ub + FEASIBILITY_TOL
            inside = ~(below | above)
            sel = dec & inside & np.isfinite(lb)
            limits[sel] = (xb[sel] - lb[sel]) / -delta[sel]
            sel = inc & inside & np.isfinite(ub)
            limits[sel] = (ub[sel] - xb[sel]) / delta[sel]
            bound_code[inc & inside] = 1
            sel = inc & below                  # rising toward its lower bound
            limits[sel] = (lb[sel] - xb[sel]) / delta[sel]
            bound_code[sel] = 0
            sel = dec & above                  # falling toward its upper bound
            limits[sel] = (xb[sel] - ub[sel]) / -delta[sel]
            bound_code[sel] = 1
        else:
            sel = dec & np.isfinite(lb)
            limits[sel] = (xb[sel] - lb[sel]) / -delta[sel]
            sel = inc & np.isfinite(ub)
            limits[sel] = (ub[sel] - xb[sel]) / delta[sel]
            bound_code[inc] = 1
        np.clip(limits, 0.0, None, out=limits)

        span_q = self.u[q] - self.l[q]
        theta = span_q if math.isfinite(span_q) else np.inf
        row = -1
        if limits.size:
            best = float(limits.min())
            if best < theta - _RATIO_TIE:
                ties = np.flatnonzero(limits <= best + _RATIO_TIE)
                if bland:
                    # pure lowest-variable-id tie break (anti-cycling)
                    row = int(ties[int(np.argmin(self.basis[ties]))])
                else:
                    # stability first (largest pivot), then lowest variable id
                    piv = np.abs(w[ties])
                    strong = ties[piv >= piv.max() * 0.5]
                    row = int(strong[int(np.argmin(self.basis[strong]))])
                theta = best
        return theta, row, int(bound_code[row]) if row >= 0 else 0

    # -- main loop -------------------------------------------------------

    def solve(self) -> LpSolution:
        if self.m == 0:
            return self._solve_unconstrained()
        self._initial_point()
        status = self._run_phase(1)
        if status == "optimal":
            status = self._run_phase(2)
        return self._finish(status)

    def _run_phase(self, phase: int) -> str:
        bland = False
        degen_streak = 0
        since_refactor = 0
        while True:
            if self.iterations >= self.iteration_limit:
                return "iteration_limit"
            if phase == 1:
                c_basic, infeas = self._phase1_cost_basic()
                if infeas <= FEASIBILITY_TOL * (1.0 + abs(self.b).max(initial=0.0)):
                    return "optimal"
            else:
                c_basic = self.c[self.basis]
            d = self._price(c_basic, phase)
            q = self._entering(d, bland)
            if q < 0:
                return "optimal" if phase == 2 else "infeasible"
            sigma = 1.0
            if self.vstat[q] == AT_UPPER or (self.vstat[q] == FREE_NB and d[q] > 0):
                sigma = -1.0

            w = self.lu.ftran(self._column(q))
            theta, row, code = self._ratio_test(q, sigma, w, phase, bland)
            if not math.isfinite(theta):
                return "unbounded" if phase == 2 else "infeasible"
            if row >= 0 and abs(w[row]) < PIVOT_TOL:
                # numerically unusable pivot: refactorize and retry once
                self.lu.refactor(self.basis)
                self._recompute_basics()
                since_refactor = 0
                w = self.lu.ftran(self._column(q))
                theta, row, code = self._ratio_test(q, sigma, w, phase, bland)
                if row >= 0 and abs(w[row]) < PIVOT_TOL:
                    return "iteration_limit"

            self.iterations += 1
            self.x[self.basis] -= sigma * theta * w
            if row < 0:
                # bound flip, no basis change
                self.vstat[q] = AT_UPPER if self.vstat[q] == AT_LOWER else AT_LOWER
                self.x[q] = self.u[q] if self.vstat[q] == AT_UPPER else self.l[q]
            else:
                p = int(self.basis[row])
                self.x[q] = self.x[q] + sigma * theta
                self.x[p] = self.u[p] if code == 1 else self.l[p]
                self.vstat[p] = AT_UPPER if code == 1 else AT_LOWER
                self.basis[row] = q
                self.basis_pos[p] = -1
                self.basis_pos[q] = row
                self.vstat[q] = BASIC
                self.lu.push_eta(row, w)
                since_refactor += 1
                if since_refactor >= REFACTOR_INTERVAL:
                    self.lu.refactor(self.basis)
                    self._recompute_basics()
                    since_refactor = 0

            if theta <= _DEGEN_STEP:
                degen_streak += 1
                if degen_streak > DEGENERATE_STREAK:
                    bland = True
            else:
                degen_streak = 0
                bland = False

    # -- wrap-up ---------------------------------------------------------

    def _solve_unconstrained(self) -> LpSolution:
        x = np.zeros(self.n)
        for j in range(self.n):
            cj, lj, uj = self.c[j], self.l[j], self.u[j]
            if cj > 0:
                if not math.isfinite(lj):
                    return self._trivial("unbounded")
                x[j] = lj
            elif cj < 0:
                if not math.isfinite(uj):
                    return self._trivial("unbounded")
                x[j] = uj
            else:
                x[j] = lj if math.isfinite(lj) else (uj if math.isfinite(uj) else 0.0)
        obj = float(self.c[:self.n] @ x) + self.obj_const
        return LpSolution("optimal", obj, x, np.zeros(0), self.c[:self.n].copy(),
                          0, obj)

    def _trivial(self, status: str) -> LpSolution:
        return LpSolution(status, math.nan, np.zeros(self.n), np.zeros(self.m),
                          np.zeros(self.n), self.iterations, math.nan)

    def _finish(self, status: str) -> LpSolution:
        if status in ("infeasible", "unbounded"):
            return self._trivial(status)
        # clean duals from a fresh factorization of the final basis
        self.lu.refactor(self.basis)
        self._recompute_basics()
        y = self.lu.btran(self.c[self.basis])
        d = self.c - (self.a_t_csr @ y)
        x = self.x[:self.n].copy()
        obj = float(self.c[:self.n] @ x) + self.obj_const
        nb_mask = self.vstat != BASIC
        finite_val = np.where(self.vstat == AT_UPPER, self.u, self.l)
        contrib = np.where(nb_mask & np.isfinite(finite_val),
                           d * np.where(np.isfinite(finite_val), finite_val, 0.0),
                           0.0)
        dual_obj = float(self.b @ y + contrib.sum()) + self.obj_const
        return LpSolution(status, obj, x, y.copy(), d[:self.n].copy(),
                          self.iterations, dual_obj)


def solve_simplex(arrays: Arrays, lb: np.ndarray | None = None,
                  ub: np.ndarray | None = None,
                  iteration_limit: int | None = None) -> LpSolution:
    """Solve the LP relaxation of `arrays` (integrality ignored)."""
    return Simplex(arrays, lb=lb, ub=ub, iteration_limit=iteration_limit).solve()
