"""Rolling real-time dispatch: a short look-ahead window re-solved every
sub-hourly interval, committing only the first interval of each window.

The window model keeps the day-ahead commitment fixed, pins PV to the
realized sub-hourly series, holds the solar-storage constancy rows, and
prices deviations of thermal and BESS dispatch from the day-ahead plan.
Deviations are measured against the day-ahead sub-hourly schedule when the
plan carries one (multi-timescale), else against the hourly dispatch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import BALANCE_TOL
from .engine import solve_milp
from .formulation import (DEFAULT_SEGMENTS, CommitmentPlan, DispatchSchedule,
                          PiecewiseCost, piecewise_linearize_cost)
from .model import INF, MilpProblem
from .scenario import Profile, Scenario, pv_active_hours


class RtSimulationError(RuntimeError):
    pass


@dataclass
class RtConfig:
    window_intervals: int = 5
    use_reserve: bool = True        # couple (32) to day-ahead reserves
    penalty_mode: str = "marginal"  # thermal deviation price: marginal | average
    span_start_hour: int = 7
    span_end_hour: int = 18         # inclusive
    n_segments: int = DEFAULT_SEGMENTS
    engine: str = "auto"
    gap: float = 1e-7
    label: str = ""


@dataclass
class RtIntervalRecord:
    interval: int                   # global 0-based interval index
    hour: int
    seg: int
    thermal_cost: float
    thermal_penalty: float
    bess_cost: float
    bess_penalty: float
    exchange_cost: float
    shed_cost: float
    thermal_power: tuple[float, ...]
    bess_discharge: tuple[float, ...]
    bess_charge: tuple[float, ...]
    bess_energy: tuple[float, ...]
    pv_power: tuple[float, ...]
    exchange: float
    curtailment: float

    @property
    def total(self) -> float:
        return (self.thermal_cost + self.thermal_penalty + self.bess_cost
                + self.bess_penalty + self.exchange_cost + self.shed_cost)


@dataclass
class RtReport:
    label: str
    baseline_note: str
    intervals: list[RtIntervalRecord] = field(default_factory=list)

    def category_totals(self) -> dict[str, float]:
        tot = {"bess": 0.0, "thermal": 0.0, "exchange": 0.0,
               "load_shedding": 0.0, "total": 0.0}
        for r in self.intervals:
            tot["bess"] += r.bess_cost + r.bess_penalty
            tot["thermal"] += r.thermal_cost + r.thermal_penalty
            tot["exchange"] += r.exchange_cost
            tot["load_shedding"] += r.shed_cost
            tot["total"] += r.total
        return tot

    def total_deviation_penalty(self) -> float:
        return sum(r.thermal_penalty + r.bess_penalty for r in self.intervals)

    def energy_trace(self, b: int = 0) -> list[float]:
        return [r.bess_energy[b] for r in self.intervals]


def _interval_hour_seg(s: Scenario, j: int) -> tuple[int, int]:
    return j // s.n_seg + 1, j % s.n_seg + 1


def _thermal_penalty_price(pw: PiecewiseCost, unit, p_da: float,
                           mode: str) -> float:
    if mode == "average" and p_da > 1e-9:
        return pw.value(p_da) / p_da
    return pw.marginal_at(p_da)


def _da_sub_reference(sched: DispatchSchedule, kind: str, i: int, t: int,
                      d: int) -> float:
    """Day-ahead reference for deviations: sub-hourly plan when present."""
    if sched.has_subhourly:
        table = {"P": sched.sub_thermal, "PDIS": sched.sub_bess_discharge,
                 "PC": sched.sub_bess_charge}[kind]
        return table[i][t - 1][d - 1]
    table = {"P": sched.thermal_power, "PDIS": sched.bess_discharge,
             "PC": sched.bess_charge}[kind]
    return table[i][t - 1]


def build_sced_window(s: Scenario, plan: CommitmentPlan,
                      day_ahead: DispatchSchedule,
                      realized_pv: tuple[Profile, ...], realized_load: Profile,
                      k0: int, e_start: list[float], cfg: RtConfig
                      ) -> tuple[MilpProblem, dict, list[int]]:
    """Window model over intervals [k0, k0+N), truncated at the horizon."""
    n_int = s.n_hours * s.n_seg
    window = list(range(k0, min(k0 + cfg.window_intervals, n_int)))
    if not window:
        raise RtSimulationError(f"window start {k0} beyond horizon")
    pw = [piecewise_linearize_cost(u, cfg.n_segments)
          for u in s.thermal_units]
    active = pv_active_hours(s)
    iex = 1 if s.grid.connected else 0
    dt = s.delta_h

    p = MilpProblem(name=f"sced_window_{k0}")
    ids: dict[tuple, int] = {}

    def add(key, **kw) -> int:
        ids[key] = p.add_variable("_".join(str(k) for k in key), **kw)
        return ids[key]

    for j in window:
        t, d = _interval_hour_seg(s, j)
        for g, u in enumerate(s.thermal_units):
            on = plan.thermal_on[g][t - 1]
            add(("PH", g, j), lb=0.0, ub=0.0 if not on else INF)
            add(("TDEVP", g, j), lb=0.0)
            add(("TDEVM", g, j), lb=0.0)
            for k in range(len(pw[g].slopes)):
                add(("SEGH", g, j, k), lb=0.0,
                    ub=pw[g].widths[k] if on else 0.0)
        for pu, prof in enumerate(realized_pv):
            v = prof.sub_at(t, d)
            add(("PPVH", pu, j), lb=v, ub=v)
        for b, bu in enumerate(s.bess_units):
            add(("PDISH", b, j), lb=0.0)
            add(("PCH", b, j), lb=0.0)
            add(("IDISH", b, j), ub=1.0, is_integer=True)
            add(("ICH", b, j), ub=1.0, is_integer=True)
            add(("EH", b, j), lb=bu.e_min, ub=bu.e_max)
            add(("BDEVP", b, j), lb=0.0)
            add(("BDEVM", b, j), lb=0.0)
        cap = s.grid.p_ex_max * iex
        add(("PEXH", j), lb=-cap, ub=cap)
        add(("EXIH", j), lb=0.0, ub=cap)
        add(("EXEH", j), lb=0.0, ub=cap)
        lv = realized_load.sub_at(t, d)
        add(("LCH", j), lb=0.0,
            ub=max(0.0, (lv - s.critical_load_fraction * lv) * (1 - iex)))

    for j in window:
        t, d = _interval_hour_seg(s, j)
        for g, u in enumerate(s.thermal_units):
            on = plan.thermal_on[g][t - 1]
            PH = ids[("PH", g, j)]
            if on:
                p.add_constraint(f"cap_lo_g{g}_j{j}", {PH: 1.0}, ">=",
                                 u.p_min, "(31)")
                p.add_constraint(f"cap_hi_g{g}_j{j}", {PH: 1.0}, "<=",
                                 u.p_max, "(31)")
                coeffs = {PH: 1.0}
                for k in range(len(pw[g].slopes)):
                    coeffs[ids[("SEGH", g, j, k)]] = -1.0
                p.add_constraint(f"pw_g{g}_j{j}", coeffs, "=", u.p_min, "(3)")
            if cfg.use_reserve:
                base = day_ahead.thermal_power[g][t - 1]
                p.add_constraint(
                    f"dev_up_g{g}_j{j}", {PH: 1.0}, "<=",
                    base + day_ahead.reserve_up[g][t - 1], "(32)")
                p.add_constraint(
                    f"dev_dn_g{g}_j{j}", {PH: 1.0}, ">=",
                    base - day_ahead.reserve_down[g][t - 1], "(32)")
            ref = _da_sub_reference(day_ahead, "P", g, t, d)
            p.add_constraint(
                f"tdev_g{g}_j{j}",
                {PH: 1.0, ids[("TDEVP", g, j)]: -1.0,
                 ids[("TDEVM", g, j)]: 1.0}, "=", ref, "penalty")
        for b, bu in enumerate(s.bess_units):
            PD, PC = ids[("PDISH", b, j)], ids[("PCH", b, j)]
            ID, IC = ids[("IDISH", b, j)], ids[("ICH", b, j)]
            EH = ids[("EH", b, j)]
            p.add_constraint(f"dis_cap_b{b}_j{j}",
                             {PD: 1.0, ID: -bu.p_discharge_max}, "<=", 0.0,
                             "(34)")
            p.add_constraint(f"ch_cap_b{b}_j{j}",
                             {PC: 1.0, IC: -bu.p_charge_max}, "<=", 0.0,
                             "(35)")
            p.add_constraint(f"mode_b{b}_j{j}", {ID: 1.0, IC: 1.0}, "<=", 1.0,
                             "(36)")
            coeffs = {EH: 1.0, PC: -bu.eta_c * dt, PD: dt / bu.eta_dis}
            if j > window[0]:
                coeffs[ids[("EH", b, j - 1)]] = -1.0
                rhs = 0.0
            else:
                rhs = e_start[b]
            p.add_constraint(f"energy_b{b}_j{j}", coeffs, "=", rhs, "(37)")
            refd = _da_sub_reference(day_ahead, "PDIS", b, t, d)
            refc = _da_sub_reference(day_ahead, "PC", b, t, d)
            p.add_constraint(
                f"bdev_b{b}_j{j}",
                {PD: 1.0, PC: 1.0, ids[("BDEVP", b, j)]: -1.0,
                 ids[("BDEVM", b, j)]: 1.0}, "=", refd + refc, "penalty")
        p.add_constraint(f"ex_split_j{j}",
                         {ids[("PEXH", j)]: 1.0, ids[("EXIH", j)]: -1.0,
                          ids[("EXEH", j)]: 1.0}, "=", 0.0, "(3)")
        if t in active:
            target = sum(day_ahead.pv_power[pu][t - 1]
                         for pu in range(len(s.pv_units)))
            coeffs = {}
            for pu in range(len(realized_pv)):
                coeffs[ids[("PPVH", pu, j)]] = 1.0
            for b in range(len(s.bess_units)):
                coeffs[ids[("PDISH", b, j)]] = 1.0
                coeffs[ids[("PCH", b, j)]] = -1.0
            p.add_constraint(f"solar_storage_j{j}", coeffs, "=", target,
                             "(43)")
        coeffs = {}
        for g in range(len(s.thermal_units)):
            coeffs[ids[("PH", g, j)]] = 1.0
        for pu in range(len(realized_pv)):
            coeffs[ids[("PPVH", pu, j)]] = 1.0
        for b in range(len(s.bess_units)):
            coeffs[ids[("PDISH", b, j)]] = 1.0
            coeffs[ids[("PCH", b, j)]] = -1.0
        coeffs[ids[("PEXH", j)]] = 1.0
        coeffs[ids[("LCH", j)]] = 1.0
        p.add_constraint(f"balance_j{j}", coeffs, "=",
                         realized_load.sub_at(t, d), "(44)")

    for j in window:
        t, d = _interval_hour_seg(s, j)
        for g, u in enumerate(s.thermal_units):
            if plan.thermal_on[g][t - 1]:
                p.objective_constant += pw[g].committed_cost * dt
                for k, slope in enumerate(pw[g].slopes):
                    p.add_objective_term(ids[("SEGH", g, j, k)], slope * dt)
            price = _thermal_penalty_price(
                pw[g], u, day_ahead.thermal_power[g][t - 1], cfg.penalty_mode)
            p.add_objective_term(ids[("TDEVP", g, j)], price * dt)
            p.add_objective_term(ids[("TDEVM", g, j)], price * dt)
        for b, bu in enumerate(s.bess_units):
            p.add_objective_term(ids[("PDISH", b, j)], bu.discharge_price * dt)
            p.add_objective_term(ids[("PCH", b, j)], bu.charge_price * dt)
            pen = max(bu.discharge_price, bu.charge_price)
            p.add_objective_term(ids[("BDEVP", b, j)], pen * dt)
            p.add_objective_term(ids[("BDEVM", b, j)], pen * dt)
        p.add_objective_term(ids[("EXIH", j)], s.grid.exchange_price * dt)
        p.add_objective_term(ids[("EXEH", j)], s.grid.exchange_price * dt)
        p.add_objective_term(ids[("LCH", j)], s.curtailment_price * dt)
    return p, ids, window


def roll_horizon(s: Scenario, plan: CommitmentPlan,
                 day_ahead: DispatchSchedule,
                 realized_pv: tuple[Profile, ...], realized_load: Profile,
                 cfg: RtConfig | None = None) -> RtReport:
    """Slide the window one interval at a time over the simulated span,
    committing the first interval of each window solution and chaining the
    stored energy through the committed intervals."""
    cfg = cfg or RtConfig()
    n_seg = s.n_seg
    start = (cfg.span_start_hour - 1) * n_seg
    end = min(cfg.span_end_hour, s.n_hours) * n_seg  # exclusive
    if start >= end:
        raise RtSimulationError("empty simulation span")
    baseline = ("deviations priced against the day-ahead sub-hourly schedule"
                if day_ahead.has_subhourly else
                "single-timescale plan: deviations priced against hourly "
                "dispatch")
    report = RtReport(label=cfg.label or ("with_reserve" if cfg.use_reserve
                                          else "without_reserve"),
                      baseline_note=baseline)
    # initial energy: day-ahead stored energy at the end of the interval
    # before the span (sub-hourly chain when present, hourly otherwise)
    e_start = []
    t0, d0 = _interval_hour_seg(s, start)
    for b, bu in enumerate(s.bess_units):
        if start == 0:
            e_start.append(bu.e_init)
        elif day_ahead.has_subhourly:
            tp, dp = _interval_hour_seg(s, start - 1)
            e_start.append(day_ahead.sub_bess_energy[b][tp - 1][dp - 1])
        else:
            tp, _ = _interval_hour_seg(s, start - 1)
            e_start.append(day_ahead.bess_energy[b][tp - 1] if tp >= 1
                           else bu.e_init)

    dt = s.delta_h
    for j in range(start, end):
        problem, ids, window = build_sced_window(
            s, plan, day_ahead, realized_pv, realized_load, j, e_start, cfg)
        res = solve_milp(problem, gap=cfg.gap, backend=cfg.engine)
        if res.status != "optimal":
            raise RtSimulationError(
                f"window at interval {j} ended {res.status}")
        x = res.primal
        t, d = _interval_hour_seg(s, j)
        pw = [piecewise_linearize_cost(u, cfg.n_segments)
              for u in s.thermal_units]
        th_cost = th_pen = 0.0
        for g, u in enumerate(s.thermal_units):
            if plan.thermal_on[g][t - 1]:
                th_cost += pw[g].value(x[ids[("PH", g, j)]]) * dt
            price = _thermal_penalty_price(
                pw[g], u, day_ahead.thermal_power[g][t - 1], cfg.penalty_mode)
            th_pen += price * dt * (x[ids[("TDEVP", g, j)]]
                                    + x[ids[("TDEVM", g, j)]])
        b_cost = b_pen = 0.0
        for b, bu in enumerate(s.bess_units):
            b_cost += dt * (bu.discharge_price * x[ids[("PDISH", b, j)]]
                            + bu.charge_price * x[ids[("PCH", b, j)]])
            pen = max(bu.discharge_price, bu.charge_price)
            b_pen += pen * dt * (x[ids[("BDEVP", b, j)]]
                                 + x[ids[("BDEVM", b, j)]])
        ex_cost = s.grid.exchange_price * dt * (x[ids[("EXIH", j)]]
                                                + x[ids[("EXEH", j)]])
        shed = s.curtailment_price * dt * x[ids[("LCH", j)]]
        report.intervals.append(RtIntervalRecord(
            interval=j, hour=t, seg=d,
            thermal_cost=th_cost, thermal_penalty=th_pen,
            bess_cost=b_cost, bess_penalty=b_pen,
            exchange_cost=ex_cost, shed_cost=shed,
            thermal_power=tuple(x[ids[("PH", g, j)]]
                                for g in range(len(s.thermal_units))),
            bess_discharge=tuple(x[ids[("PDISH", b, j)]]
                                 for b in range(len(s.bess_units))),
            bess_charge=tuple(x[ids[("PCH", b, j)]]
                              for b in range(len(s.bess_units))),
            bess_energy=tuple(x[ids[("EH", b, j)]]
                              for b in range(len(s.bess_units))),
            pv_power=tuple(x[ids[("PPVH", pu, j)]]
                           for pu in range(len(s.pv_units))),
            exchange=float(x[ids[("PEXH", j)]]),
            curtailment=float(x[ids[("LCH", j)]])))
        e_start = [float(x[ids[("EH", b, j)]])
                   for b in range(len(s.bess_units))]
    return report


def compare_plans(s: Scenario, plan_multi: CommitmentPlan,
                  sched_multi: DispatchSchedule, plan_single: CommitmentPlan,
                  sched_single: DispatchSchedule,
                  realized_pv: tuple[Profile, ...], realized_load: Profile,
                  cfg: RtConfig | None = None) -> tuple[RtReport, RtReport]:
    """Run the rolling dispatch under the multi- and single-timescale plans
    on identical realized profiles."""
    cfg = cfg or RtConfig()
    from dataclasses import replace as _replace
    rep_multi = roll_horizon(s, plan_multi, sched_multi, realized_pv,
                             realized_load,
                             _replace(cfg, label="multi_timescale"))
    rep_single = roll_horizon(s, plan_single, sched_single, realized_pv,
                              realized_load,
                              _replace(cfg, label="single_timescale"))
    return rep_multi, rep_single
