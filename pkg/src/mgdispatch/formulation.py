"""Model builders: hourly commitment block, sub-hourly dispatch block,
worst-case recourse block, objective, and master assembly.

Every emitted row and every bound that stands in for a whole equation
carries a provenance tag naming the model equation; rows that only realize
the piecewise cost terms or the exchange cost split carry the objective
tag "(3)".

Variable key conventions (all hours t and slots d are 1-indexed):
  ("P", g, t)        thermal output          ("RU", g, t)/("RD", g, t) reserves
  ("I", g, t)        on/off                  ("Y", g, t)/("Z", g, t) start/stop
  ("SEG", g, t, k)   hourly cost segment
  ("PPV", p, t)      hourly pv dispatch
  ("PDIS", b, t) / ("PC", b, t)   bess discharge/charge
  ("RUDIS", b, t) / ("RUC", b, t) bess upward reserves
  ("IDIS", b, t) / ("IC", b, t)   bess mode statuses
  ("E", b, t)        hourly stored energy
  ("PEX", t), ("EXI", t), ("EXE", t)  net exchange and import/export split
  ("LC", t)          hourly curtailment      ("ZT", t) recourse cost bound
  sub-hourly twins get an "H" suffix and a trailing d index; worst-case
  copies get a "W" prefix and a trailing point id v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import (BALANCE_TOL, COST_BREAKDOWN_TOL, ENERGY_TOL,
                        INTEGRALITY_TOL)
from .engine import SolveResult
from .model import INF, MilpProblem, VariableIndex
from .scenario import (Scenario, ThermalUnit, UncertaintyRealization,
                       pv_active_hours, total_pv_forecast)

DEFAULT_SEGMENTS = 4


class ScheduleError(RuntimeError):
    """An extracted solution violated a hard schedule invariant."""


# ---------------------------------------------------------------------------
# piecewise linearization of the quadratic production cost
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseCost:
    """Convex piecewise model of cost(P) = a + b P + c P^2 on [p_min, p_max].

    committed_cost is the exact cost at p_min (charged per committed hour);
    segment k adds slope[k] per kW within its width. Convexity makes the
    slopes nondecreasing, so segments fill in order without binaries.
    """

    p_min: float
    p_max: float
    committed_cost: float
    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    widths: tuple[float, ...]

    def value(self, p: float) -> float:
        """Piecewise cost at output p (p_min <= p <= p_max)."""
        cost = self.committed_cost
        rem = p - self.p_min
        for w, s in zip(self.widths, self.slopes):
            step = min(max(rem, 0.0), w)
            cost += s * step
            rem -= step
        return cost

    def marginal_at(self, p: float) -> float:
        """Slope of the active segment at output p."""
        rem = p - self.p_min
        for w, s in zip(self.widths, self.slopes):
            if rem <= w or w == 0.0:
                return s
            rem -= w
        return self.slopes[-1] if self.slopes else 0.0


def quadratic_cost(unit: ThermalUnit, p: float) -> float:
    return unit.a + unit.b * p + unit.c * p * p


def piecewise_linearize_cost(unit: ThermalUnit,
                             n_segments: int = DEFAULT_SEGMENTS) -> PiecewiseCost:
    """Equal-width chords of the quadratic on [p_min, p_max].

    Requires c >= 0 (convex). The piecewise value is >= the quadratic
    everywhere, exact at breakpoints, with error at most
    c * ((p_max - p_min) / n_segments)**2 / 4.
    """
    if unit.c < 0:
        raise ValueError(f"{unit.name}: quadratic coefficient must be >= 0")
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    width = (unit.p_max - unit.p_min) / n_segments
    bps = [unit.p_min + k * width for k in range(n_segments + 1)]
    bps[-1] = unit.p_max
    slopes = []
    for k in range(n_segments):
        if width > 0:
            slopes.append((quadratic_cost(unit, bps[k + 1])
                           - quadratic_cost(unit, bps[k])) / width)
        else:
            slopes.append(unit.b + 2.0 * unit.c * unit.p_min)
    return PiecewiseCost(
        p_min=unit.p_min, p_max=unit.p_max,
        committed_cost=quadratic_cost(unit, unit.p_min),
        breakpoints=tuple(bps), slopes=tuple(slopes),
        widths=tuple(width for _ in range(n_segments)))


# ---------------------------------------------------------------------------
# first-stage (hourly) block: equations (4)-(30)
# ---------------------------------------------------------------------------

def _init_on(unit: ThermalUnit) -> int:
    return 1 if unit.init_status == "on" else 0


def build_hourly_block(s: Scenario, idx: VariableIndex,
                       pw: list[PiecewiseCost],
                       fix_zero_reserves: bool = False) -> list[int]:
    """Emit variables and rows (4)-(30); returns the row ids added."""
    p = idx.problem
    added: list[int] = []
    iex = 1 if s.grid.connected else 0
    T = s.n_hours

    def row(name, coeffs, sense, rhs, tag):
        added.append(p.add_constraint(name, coeffs, sense, rhs, tag))

    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            idx.add(("P", g, t))
            rcap = 0.0 if fix_zero_reserves else INF
            idx.add(("RU", g, t), lb=0.0, ub=rcap, tag="(13)")
            idx.add(("RD", g, t), lb=0.0, ub=rcap, tag="(14)")
            idx.add(("I", g, t), ub=1.0, is_integer=True)
            idx.add(("Y", g, t), ub=1.0, is_integer=True)
            idx.add(("Z", g, t), ub=1.0, is_integer=True)
            for k in range(len(pw[g].slopes)):
                idx.add(("SEG", g, t, k), lb=0.0, ub=pw[g].widths[k], tag="(3)")
    for pu in range(len(s.pv_units)):
        for t in s.hours:
            idx.add(("PPV", pu, t), lb=0.0, ub=s.pv_units[pu].hourly_at(t),
                    tag="(15)")
    for b, bu in enumerate(s.bess_units):
        for t in s.hours:
            idx.add(("PDIS", b, t), lb=0.0, tag="(19)")
            idx.add(("PC", b, t), lb=0.0, tag="(20)")
            rcap = 0.0 if fix_zero_reserves else INF
            idx.add(("RUDIS", b, t), lb=0.0, ub=rcap, tag="(24)")
            idx.add(("RUC", b, t), lb=0.0, ub=rcap, tag="(24)")
            idx.add(("IDIS", b, t), ub=1.0, is_integer=True)
            idx.add(("IC", b, t), ub=1.0, is_integer=True)
            idx.add(("E", b, t), lb=bu.e_min, ub=bu.e_max, tag="(26)")
    for t in s.hours:
        ex_cap = s.grid.p_ex_max * iex
        idx.add(("PEX", t), lb=-ex_cap, ub=ex_cap, tag="(16)")
        idx.add(("EXI", t), lb=0.0, ub=ex_cap, tag="(3)")
        idx.add(("EXE", t), lb=0.0, ub=ex_cap, tag="(3)")
        lc_cap = (s.load.hourly_at(t) - s.critical_load(t)) * (1 - iex)
        idx.add(("LC", t), lb=0.0, ub=max(lc_cap, 0.0), tag="(18)")
        idx.add(("ZT", t), lb=0.0, tag="(58)")

    for g, u in enumerate(s.thermal_units):
        on0 = _init_on(u)
        # carry-over of the initial on/off run
        if on0:
            hold = max(0, u.t_on - u.init_hours)
            for t in range(1, min(hold, T) + 1):
                p.set_bounds(idx[("I", g, t)], 1.0, 1.0, tag="(7)")
        else:
            hold = max(0, u.t_off - u.init_hours)
            for t in range(1, min(hold, T) + 1):
                p.set_bounds(idx[("I", g, t)], 0.0, 0.0, tag="(8)")
        for t in s.hours:
            P, I = idx[("P", g, t)], idx[("I", g, t)]
            Y, Z = idx[("Y", g, t)], idx[("Z", g, t)]
            RUv, RDv = idx[("RU", g, t)], idx[("RD", g, t)]
            row(f"cap_lo_g{g}_t{t}", {P: 1.0, I: -u.p_min}, ">=", 0.0, "(4)")
            row(f"cap_hi_g{g}_t{t}", {P: 1.0, I: -u.p_max}, "<=", 0.0, "(4)")
            prev = {idx[("P", g, t - 1)]: -1.0} if t > 1 else {}
            prev_rhs = u.init_power * on0 if t == 1 else 0.0
            row(f"ramp_up_g{g}_t{t}",
                {P: 1.0, **prev, Y: u.ramp_up - u.p_min}, "<=",
                u.ramp_up + prev_rhs, "(5)")
            prev = {idx[("P", g, t - 1)]: 1.0} if t > 1 else {}
            row(f"ramp_dn_g{g}_t{t}",
                {P: -1.0, **prev, Z: u.ramp_down - u.p_min}, "<=",
                u.ramp_down - prev_rhs, "(6)")
            w_on = min(u.t_on, T - t + 1)
            coeffs = {idx[("I", g, tau)]: 1.0 for tau in range(t, t + w_on)}
            coeffs[Y] = coeffs.get(Y, 0.0) - float(w_on)
            row(f"min_on_g{g}_t{t}", coeffs, ">=", 0.0, "(7)")
            w_off = min(u.t_off, T - t + 1)
            coeffs = {idx[("I", g, tau)]: 1.0 for tau in range(t, t + w_off)}
            coeffs[Z] = coeffs.get(Z, 0.0) + float(w_off)
            row(f"min_off_g{g}_t{t}", coeffs, "<=", float(w_off), "(8)")
            row(f"startstop_g{g}_t{t}", {Y: 1.0, Z: 1.0}, "<=", 1.0, "(9)")
            coeffs = {Y: 1.0, Z: -1.0, I: -1.0}
            rhs = -float(on0) if t == 1 else 0.0
            if t > 1:
                coeffs[idx[("I", g, t - 1)]] = 1.0
            row(f"indicator_g{g}_t{t}", coeffs, "=", rhs, "(10)")
            row(f"res_up_room_g{g}_t{t}", {P: 1.0, RUv: 1.0, I: -u.p_max},
                "<=", 0.0, "(11)")
            row(f"res_dn_room_g{g}_t{t}", {P: 1.0, RDv: -1.0, I: -u.p_min},
                ">=", 0.0, "(12)")
            row(f"res_up_ramp_g{g}_t{t}", {RUv: 1.0, I: -u.ramp_up}, "<=",
                0.0, "(13)")
            row(f"res_dn_ramp_g{g}_t{t}", {RDv: 1.0, I: -u.ramp_down}, "<=",
                0.0, "(14)")
            coeffs = {P: 1.0, I: -u.p_min}
            for k in range(len(pw[g].slopes)):
                coeffs[idx[("SEG", g, t, k)]] = -1.0
            row(f"pw_link_g{g}_t{t}", coeffs, "=", 0.0, "(3)")

    for t in s.hours:
        if t > 1:
            lim = s.grid.k_ex * s.grid.p_ex_max
            pe, pp = idx[("PEX", t)], idx[("PEX", t - 1)]
            row(f"ex_ramp_up_t{t}", {pe: 1.0, pp: -1.0}, "<=", lim, "(17)")
            row(f"ex_ramp_dn_t{t}", {pe: 1.0, pp: -1.0}, ">=", -lim, "(17)")
        row(f"ex_split_t{t}",
            {idx[("PEX", t)]: 1.0, idx[("EXI", t)]: -1.0,
             idx[("EXE", t)]: 1.0}, "=", 0.0, "(3)")

    for b, bu in enumerate(s.bess_units):
        for t in s.hours:
            PD, PC = idx[("PDIS", b, t)], idx[("PC", b, t)]
            RD_, RC = idx[("RUDIS", b, t)], idx[("RUC", b, t)]
            ID, IC = idx[("IDIS", b, t)], idx[("IC", b, t)]
            E = idx[("E", b, t)]
            row(f"bess_dis_cap_b{b}_t{t}", {PD: 1.0, ID: -bu.p_discharge_max},
                "<=", 0.0, "(19)")
            row(f"bess_ch_cap_b{b}_t{t}", {PC: 1.0, IC: -bu.p_charge_max},
                "<=", 0.0, "(20)")
            row(f"bess_mode_b{b}_t{t}", {ID: 1.0, IC: 1.0}, "<=", 1.0, "(21)")
            row(f"bess_dis_res_b{b}_t{t}",
                {PD: 1.0, RD_: 1.0, ID: -bu.p_discharge_max}, "<=", 0.0, "(22)")
            row(f"bess_ch_res_b{b}_t{t}",
                {PC: 1.0, RC: 1.0, IC: -bu.p_charge_max}, "<=", 0.0, "(23)")
            coeffs = {E: 1.0, PC: -bu.eta_c, PD: 1.0 / bu.eta_dis}
            rhs = bu.e_init if t == 1 else 0.0
            if t > 1:
                coeffs[idx[("E", b, t - 1)]] = -1.0
            row(f"energy_b{b}_t{t}", coeffs, "=", rhs, "(25)")
            row(f"res_energy_dn_b{b}_t{t}", {E: 1.0, RD_: -1.0 / bu.eta_dis},
                ">=", bu.e_min, "(27)")
            row(f"res_energy_up_b{b}_t{t}", {E: 1.0, RC: bu.eta_c},
                "<=", bu.e_max, "(28)")
        row(f"energy_terminal_b{b}",
            {idx[("E", b, s.n_hours)]: 1.0}, "=", bu.e_init, "(29)")

    for t in s.hours:
        coeffs: dict[int, float] = {}
        for g in range(len(s.thermal_units)):
            coeffs[idx[("P", g, t)]] = 1.0
        for pu in range(len(s.pv_units)):
            coeffs[idx[("PPV", pu, t)]] = 1.0
        for b in range(len(s.bess_units)):
            coeffs[idx[("PDIS", b, t)]] = 1.0
            coeffs[idx[("PC", b, t)]] = -1.0
        coeffs[idx[("PEX", t)]] = 1.0
        coeffs[idx[("LC", t)]] = 1.0
        row(f"balance_t{t}", coeffs, "=", s.load.hourly_at(t), "(30)")
    return added


# ---------------------------------------------------------------------------
# sub-hourly block: equations (31)-(44)
# ---------------------------------------------------------------------------

def build_subhourly_block(s: Scenario, idx: VariableIndex,
                          pw: list[PiecewiseCost],
                          constancy_all_hours: bool = False) -> list[int]:
    p = idx.problem
    added: list[int] = []
    iex = 1 if s.grid.connected else 0
    active = pv_active_hours(s) if not constancy_all_hours else set(s.hours)

    def row(name, coeffs, sense, rhs, tag):
        added.append(p.add_constraint(name, coeffs, sense, rhs, tag))

    for g in range(len(s.thermal_units)):
        for t in s.hours:
            for d in s.segs:
                idx.add(("PH", g, t, d))
                for k in range(len(pw[g].slopes)):
                    idx.add(("SEGH", g, t, d, k), lb=0.0, ub=pw[g].widths[k],
                            tag="(3)")
    for pu, prof in enumerate(s.pv_units):
        for t in s.hours:
            for d in s.segs:
                v = prof.sub_at(t, d)
                idx.add(("PPVH", pu, t, d), lb=v, ub=v, tag="(33)")
    for b, bu in enumerate(s.bess_units):
        for t in s.hours:
            for d in s.segs:
                idx.add(("PDISH", b, t, d), lb=0.0, tag="(34)")
                idx.add(("PCH", b, t, d), lb=0.0, tag="(35)")
                idx.add(("IDISH", b, t, d), ub=1.0, is_integer=True)
                idx.add(("ICH", b, t, d), ub=1.0, is_integer=True)
                idx.add(("EH", b, t, d), lb=bu.e_min, ub=bu.e_max, tag="(38)")
    for t in s.hours:
        for d in s.segs:
            cap = s.grid.p_ex_max * iex
            idx.add(("PEXH", t, d), lb=-cap, ub=cap, tag="(39)")
            lc_cap = max(0.0, (s.load.sub_at(t, d)
                               - s.critical_load_fraction * s.load.sub_at(t, d))
                         * (1 - iex))
            idx.add(("LCH", t, d), lb=0.0, ub=lc_cap, tag="(40)")
            idx.add(("SLC", t, d), lb=0.0, tag="(42)")

    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            I = idx[("I", g, t)]
            P = idx[("P", g, t)]
            for d in s.segs:
                PH = idx[("PH", g, t, d)]
                row(f"sub_cap_lo_g{g}_t{t}_d{d}", {PH: 1.0, I: -u.p_min},
                    ">=", 0.0, "(31)")
                row(f"sub_cap_hi_g{g}_t{t}_d{d}", {PH: 1.0, I: -u.p_max},
                    "<=", 0.0, "(31)")
                row(f"sub_dev_up_g{g}_t{t}_d{d}",
                    {PH: 1.0, P: -1.0, idx[("RU", g, t)]: -1.0}, "<=", 0.0,
                    "(32)")
                row(f"sub_dev_dn_g{g}_t{t}_d{d}",
                    {PH: 1.0, P: -1.0, idx[("RD", g, t)]: 1.0}, ">=", 0.0,
                    "(32)")
                coeffs = {PH: 1.0, I: -u.p_min}
                for k in range(len(pw[g].slopes)):
                    coeffs[idx[("SEGH", g, t, d, k)]] = -1.0
                row(f"sub_pw_link_g{g}_t{t}_d{d}", coeffs, "=", 0.0, "(3)")

    for b, bu in enumerate(s.bess_units):
        for t in s.hours:
            for d in s.segs:
                PDH, PCH = idx[("PDISH", b, t, d)], idx[("PCH", b, t, d)]
                IDH, ICH = idx[("IDISH", b, t, d)], idx[("ICH", b, t, d)]
                EH = idx[("EH", b, t, d)]
                row(f"sub_dis_cap_b{b}_t{t}_d{d}",
                    {PDH: 1.0, IDH: -bu.p_discharge_max}, "<=", 0.0, "(34)")
                row(f"sub_ch_cap_b{b}_t{t}_d{d}",
                    {PCH: 1.0, ICH: -bu.p_charge_max}, "<=", 0.0, "(35)")
                row(f"sub_mode_b{b}_t{t}_d{d}", {IDH: 1.0, ICH: 1.0}, "<=",
                    1.0, "(36)")
                coeffs = {EH: 1.0, PCH: -bu.eta_c * s.delta_h,
                          PDH: s.delta_h / bu.eta_dis}
                if d > 1:
                    coeffs[idx[("EH", b, t, d - 1)]] = -1.0
                    rhs = 0.0
                elif t > 1:
                    coeffs[idx[("EH", b, t - 1, s.n_seg)]] = -1.0
                    rhs = 0.0
                else:
                    rhs = bu.e_init
                row(f"sub_energy_b{b}_t{t}_d{d}", coeffs, "=", rhs, "(37)")

    for t in s.hours:
        for d in s.segs:
            row(f"sub_curt_slack_t{t}_d{d}",
                {idx[("LCH", t, d)]: 1.0, idx[("LC", t)]: -1.0,
                 idx[("SLC", t, d)]: -1.0}, "<=", 0.0, "(41)")
            if t in active:
                coeffs: dict[int, float] = {}
                for pu in range(len(s.pv_units)):
                    coeffs[idx[("PPVH", pu, t, d)]] = 1.0
                for b in range(len(s.bess_units)):
                    coeffs[idx[("PDISH", b, t, d)]] = 1.0
                    coeffs[idx[("PCH", b, t, d)]] = -1.0
                for pu in range(len(s.pv_units)):
                    coeffs[idx[("PPV", pu, t)]] = coeffs.get(
                        idx[("PPV", pu, t)], 0.0) - 1.0
                row(f"solar_storage_t{t}_d{d}", coeffs, "=", 0.0, "(43)")
            coeffs = {}
            for g in range(len(s.thermal_units)):
                coeffs[idx[("PH", g, t, d)]] = 1.0
            for pu in range(len(s.pv_units)):
                coeffs[idx[("PPVH", pu, t, d)]] = 1.0
            for b in range(len(s.bess_units)):
                coeffs[idx[("PDISH", b, t, d)]] = 1.0
                coeffs[idx[("PCH", b, t, d)]] = -1.0
            coeffs[idx[("PEXH", t, d)]] = 1.0
            coeffs[idx[("LCH", t, d)]] = 1.0
            row(f"sub_balance_t{t}_d{d}", coeffs, "=", s.load.sub_at(t, d),
                "(44)")
    return added


# ---------------------------------------------------------------------------
# worst-case recourse template: equations (45)-(60)
# ---------------------------------------------------------------------------

@dataclass
class WcRow:
    name: str
    tag: str
    sense: str
    rhs: float
    rec: dict[tuple, float]          # recourse-variable coefficients
    fs: dict[tuple, float] = field(default_factory=dict)   # first-stage coeffs
    eps: dict[tuple, float] = field(default_factory=dict)  # uncertainty coeffs
    d1: bool = False                 # True: slack-carrying row of the subproblem


@dataclass
class WcTemplate:
    rows: list[WcRow]
    rec_bounds: dict[tuple, tuple[float, float, str]]
    fs_keys: list[tuple]

    def fold_first_stage(self, row: WcRow, fs_values: dict[tuple, float]) -> float:
        """rhs after moving the fixed first-stage terms across."""
        return row.rhs - sum(coef * fs_values[k] for k, coef in row.fs.items())


def build_worst_case_template(s: Scenario,
                              constancy_all_hours: bool = False) -> WcTemplate:
    """Rows (45)-(60) over recourse keys, first-stage keys, and uncertainty
    coordinates. The rows tagged d1 are the ones that receive slack in the
    feasibility subproblem: PV pinning (47), the recourse-cost cap (57),
    the balance (59), and the solar-storage constancy (60)."""
    rows: list[WcRow] = []
    rec_bounds: dict[tuple, tuple[float, float, str]] = {}
    iex = 1 if s.grid.connected else 0
    active = pv_active_hours(s) if not constancy_all_hours else set(s.hours)
    fs_used: set[tuple] = set()

    def fs(key: tuple) -> tuple:
        fs_used.add(key)
        return key

    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            rec_bounds[("WP", g, t)] = (0.0, INF, "(45)")
            rows.append(WcRow(f"w_cap_lo_g{g}_t{t}", "(45)", ">=", 0.0,
                              {("WP", g, t): 1.0},
                              {fs(("I", g, t)): -u.p_min}))
            rows.append(WcRow(f"w_cap_hi_g{g}_t{t}", "(45)", "<=", 0.0,
                              {("WP", g, t): 1.0},
                              {fs(("I", g, t)): -u.p_max}))
            rows.append(WcRow(f"w_dev_up_g{g}_t{t}", "(46)", "<=", 0.0,
                              {("WP", g, t): 1.0},
                              {fs(("P", g, t)): -1.0, fs(("RU", g, t)): -1.0}))
            rows.append(WcRow(f"w_dev_dn_g{g}_t{t}", "(46)", ">=", 0.0,
                              {("WP", g, t): 1.0},
                              {fs(("P", g, t)): -1.0, fs(("RD", g, t)): 1.0}))
    for pu, prof in enumerate(s.pv_units):
        for t in s.hours:
            rec_bounds[("WPPV", pu, t)] = (0.0, INF, "(47)")
            rows.append(WcRow(f"w_pv_pin_g{pu}_t{t}", "(47)", "=",
                              prof.hourly_at(t), {("WPPV", pu, t): 1.0},
                              eps={("pv", pu, t): -1.0}, d1=True))
    for b, bu in enumerate(s.bess_units):
        for t in s.hours:
            rec_bounds[("WPDIS", b, t)] = (0.0, INF, "(48)")
            rec_bounds[("WPC", b, t)] = (0.0, INF, "(49)")
            rec_bounds[("WE", b, t)] = (bu.e_min, bu.e_max, "(54)")
            rows.append(WcRow(f"w_dis_cap_b{b}_t{t}", "(48)", "<=", 0.0,
                              {("WPDIS", b, t): 1.0},
                              {fs(("IDIS", b, t)): -bu.p_discharge_max}))
            rows.append(WcRow(f"w_ch_cap_b{b}_t{t}", "(49)", "<=", 0.0,
                              {("WPC", b, t): 1.0},
                              {fs(("IC", b, t)): -bu.p_charge_max}))
            rows.append(WcRow(f"w_dis_res_b{b}_t{t}", "(50)", "<=", 0.0,
                              {("WPDIS", b, t): 1.0},
                              {fs(("PDIS", b, t)): -1.0,
                               fs(("RUDIS", b, t)): -1.0}))
            rows.append(WcRow(f"w_ch_res_b{b}_t{t}", "(51)", "<=", 0.0,
                              {("WPC", b, t): 1.0},
                              {fs(("PC", b, t)): -1.0,
                               fs(("RUC", b, t)): -1.0}))
            rec = {("WE", b, t): 1.0, ("WPC", b, t): -bu.eta_c,
                   ("WPDIS", b, t): 1.0 / bu.eta_dis}
            rhs = bu.e_init if t == 1 else 0.0
            if t > 1:
                rec[("WE", b, t - 1)] = -1.0
            rows.append(WcRow(f"w_energy_b{b}_t{t}", "(52)", "=", rhs, rec))
        rows.append(WcRow(f"w_energy_terminal_b{b}", "(53)", "=", bu.e_init,
                          {("WE", b, s.n_hours): 1.0}))
    for t in s.hours:
        cap = s.grid.p_ex_max * iex
        rec_bounds[("WPEX", t)] = (-cap, cap, "(55)")
        lc_cap = max(0.0, (s.load.hourly_at(t) - s.critical_load(t)) * (1 - iex))
        rec_bounds[("WLC", t)] = (0.0, lc_cap, "(56)")
        rows.append(WcRow(f"w_recourse_cost_t{t}", "(57)", "<=", 0.0,
                          {("WLC", t): s.curtailment_price},
                          {fs(("ZT", t)): -1.0}, d1=True))
        rec = {}
        for g in range(len(s.thermal_units)):
            rec[("WP", g, t)] = 1.0
        for pu in range(len(s.pv_units)):
            rec[("WPPV", pu, t)] = 1.0
        for b in range(len(s.bess_units)):
            rec[("WPDIS", b, t)] = 1.0
            rec[("WPC", b, t)] = -1.0
        rec[("WPEX", t)] = 1.0
        rec[("WLC", t)] = 1.0
        rows.append(WcRow(f"w_balance_t{t}", "(59)", "=", s.load.hourly_at(t),
                          rec, eps={("ld", t): -1.0}, d1=True))
        if t in active:
            rec = {}
            for pu in range(len(s.pv_units)):
                rec[("WPPV", pu, t)] = 1.0
            for b in range(len(s.bess_units)):
                rec[("WPDIS", b, t)] = 1.0
                rec[("WPC", b, t)] = -1.0
            fs_coeffs = {fs(("PPV", pu, t)): -1.0
                         for pu in range(len(s.pv_units))}
            rows.append(WcRow(f"w_solar_storage_t{t}", "(60)", "=", 0.0,
                              rec, fs_coeffs, d1=True))
    return WcTemplate(rows=rows, rec_bounds=rec_bounds,
                      fs_keys=sorted(fs_used, key=repr))


def build_worst_case_block(s: Scenario, idx: VariableIndex,
                           eps: UncertaintyRealization, v: int,
                           template: WcTemplate | None = None,
                           constancy_all_hours: bool = False) -> list[int]:
    """Instantiate the worst-case template for point v inside the master,
    with eps plugged in as constants and first-stage keys wired to the
    master's variables."""
    tpl = template or build_worst_case_template(s, constancy_all_hours)
    p = idx.problem
    added = []
    for key, (lb, ub, tag) in tpl.rec_bounds.items():
        idx.add(key + (v,), lb=lb, ub=ub, tag=tag)
    for r in tpl.rows:
        coeffs = {idx[key + (v,)]: coef for key, coef in r.rec.items()}
        for key, coef in r.fs.items():
            vid = idx[key]
            coeffs[vid] = coeffs.get(vid, 0.0) + coef
        rhs = r.rhs - sum(coef * eps.value(k) for k, coef in r.eps.items())
        added.append(p.add_constraint(f"{r.name}_v{v}", coeffs, r.sense, rhs,
                                      r.tag))
    return added


# ---------------------------------------------------------------------------
# objective: equation (3)
# ---------------------------------------------------------------------------

def build_objective(s: Scenario, idx: VariableIndex,
                    pw: list[PiecewiseCost],
                    include_subhourly: bool = True) -> None:
    """Minimize the seven-line cost (3). Exchange cost is priced on
    |P_ex| via the import/export split."""
    p = idx.problem
    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            p.add_objective_term(idx[("I", g, t)], pw[g].committed_cost)
            for k, slope in enumerate(pw[g].slopes):
                p.add_objective_term(idx[("SEG", g, t, k)], slope)
            p.add_objective_term(idx[("Y", g, t)], u.su_cost)
            p.add_objective_term(idx[("Z", g, t)], u.sd_cost)
            p.add_objective_term(idx[("RU", g, t)], u.reserve_price)
            p.add_objective_term(idx[("RD", g, t)], u.reserve_price)
    for b, bu in enumerate(s.bess_units):
        for t in s.hours:
            p.add_objective_term(idx[("RUDIS", b, t)], bu.reserve_price)
            p.add_objective_term(idx[("RUC", b, t)], bu.reserve_price)
    for t in s.hours:
        p.add_objective_term(idx[("EXI", t)], s.grid.exchange_price)
        p.add_objective_term(idx[("EXE", t)], s.grid.exchange_price)
        p.add_objective_term(idx[("LC", t)], s.curtailment_price)
        p.add_objective_term(idx[("ZT", t)], 1.0)
    if not include_subhourly:
        return
    dt = s.delta_h
    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            for d in s.segs:
                p.add_objective_term(idx[("I", g, t)],
                                     pw[g].committed_cost * dt)
                for k, slope in enumerate(pw[g].slopes):
                    p.add_objective_term(idx[("SEGH", g, t, d, k)], slope * dt)
    for b, bu in enumerate(s.bess_units):
        for t in s.hours:
            for d in s.segs:
                p.add_objective_term(idx[("PDISH", b, t, d)],
                                     bu.discharge_price * dt)
                p.add_objective_term(idx[("PCH", b, t, d)],
                                     bu.charge_price * dt)
    for t in s.hours:
        for d in s.segs:
            p.add_objective_term(idx[("SLC", t, d)], s.curtailment_price * dt)


# ---------------------------------------------------------------------------
# master assembly and census
# ---------------------------------------------------------------------------

def assemble_master(s: Scenario, points: list[UncertaintyRealization],
                    n_segments: int = DEFAULT_SEGMENTS,
                    include_subhourly: bool = True,
                    fix_zero_reserves: bool = False,
                    constancy_all_hours: bool = False
                    ) -> tuple[MilpProblem, VariableIndex]:
    """Hourly block + sub-hourly block + one worst-case block per point +
    objective. With no points this is the deterministic model."""
    problem = MilpProblem(name=f"{s.name}_master")
    idx = VariableIndex(problem)
    pw = [piecewise_linearize_cost(u, n_segments) for u in s.thermal_units]
    build_hourly_block(s, idx, pw, fix_zero_reserves=fix_zero_reserves)
    if include_subhourly:
        build_subhourly_block(s, idx, pw,
                              constancy_all_hours=constancy_all_hours)
    template = build_worst_case_template(s, constancy_all_hours)
    for v, eps in enumerate(points):
        build_worst_case_block(s, idx, eps, v, template=template)
    build_objective(s, idx, pw, include_subhourly=include_subhourly)
    problem.validate()
    return problem, idx


def master_census(s: Scenario, n_points: int = 0,
                  n_segments: int = DEFAULT_SEGMENTS,
                  include_subhourly: bool = True) -> dict[str, int]:
    """Closed-form variable/constraint counts for assemble_master."""
    ng, nb, npv = len(s.thermal_units), len(s.bess_units), len(s.pv_units)
    T, S = s.n_hours, s.n_hours * s.n_seg
    A = len(pv_active_hours(s))
    K = n_segments
    var_h = ng * T * (6 + K) + npv * T + nb * T * 7 + 5 * T
    con_h = 13 * ng * T + 8 * nb * T + nb + 2 * (T - 1) + 2 * T
    var_s = ng * S * (1 + K) + npv * S + nb * S * 5 + 3 * S
    con_s = 5 * ng * S + 4 * nb * S + 2 * S + A * s.n_seg
    var_w = ng * T + npv * T + 3 * nb * T + 2 * T
    con_w = 4 * ng * T + npv * T + 5 * nb * T + nb + 2 * T + A
    out = {"hourly_vars": var_h, "hourly_cons": con_h,
           "subhourly_vars": var_s if include_subhourly else 0,
           "subhourly_cons": con_s if include_subhourly else 0,
           "worst_case_vars_per_point": var_w,
           "worst_case_cons_per_point": con_w}
    out["total_vars"] = (out["hourly_vars"] + out["subhourly_vars"]
                         + n_points * var_w)
    out["total_cons"] = (out["hourly_cons"] + out["subhourly_cons"]
                         + n_points * con_w)
    return out


# ---------------------------------------------------------------------------
# schedule extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CommitmentPlan:
    thermal_on: tuple[tuple[int, ...], ...]        # [g][t-1]
    thermal_start: tuple[tuple[int, ...], ...]
    thermal_stop: tuple[tuple[int, ...], ...]
    bess_discharge_mode: tuple[tuple[int, ...], ...]
    bess_charge_mode: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class DispatchSchedule:
    thermal_power: tuple[tuple[float, ...], ...]       # [g][t-1]
    reserve_up: tuple[tuple[float, ...], ...]
    reserve_down: tuple[tuple[float, ...], ...]
    pv_power: tuple[tuple[float, ...], ...]            # [pv][t-1]
    bess_discharge: tuple[tuple[float, ...], ...]
    bess_charge: tuple[tuple[float, ...], ...]
    bess_reserve_dis: tuple[tuple[float, ...], ...]
    bess_reserve_ch: tuple[tuple[float, ...], ...]
    bess_energy: tuple[tuple[float, ...], ...]
    exchange: tuple[float, ...]
    curtailment: tuple[float, ...]
    recourse_bound: tuple[float, ...]                  # Z_t
    sub_thermal: tuple                                  # [g][t-1][d-1]
    sub_pv: tuple
    sub_bess_discharge: tuple
    sub_bess_charge: tuple
    sub_bess_energy: tuple
    sub_exchange: tuple
    sub_curtailment: tuple
    sub_curtail_slack: tuple
    sub_dis_status: tuple
    sub_ch_status: tuple
    cost_breakdown: dict[str, float]
    total_cost: float
    has_subhourly: bool = True


COST_LINES = ("hourly_thermal_exchange_curtailment", "thermal_reserve",
              "bess_reserve", "subhourly_thermal", "subhourly_bess",
              "subhourly_curtailment_penalty", "worst_case_recourse")


def compute_cost_breakdown(s: Scenario, idx: VariableIndex, x: np.ndarray,
                           pw: list[PiecewiseCost],
                           include_subhourly: bool = True) -> dict[str, float]:
    """The seven lines of the objective, recomputed from primal values."""
    val = lambda key: idx.value(x, key)
    line1 = 0.0
    line2 = 0.0
    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            line1 += pw[g].committed_cost * val(("I", g, t))
            line1 += sum(pw[g].slopes[k] * val(("SEG", g, t, k))
                         for k in range(len(pw[g].slopes)))
            line1 += u.su_cost * val(("Y", g, t)) + u.sd_cost * val(("Z", g, t))
            line2 += u.reserve_price * (val(("RU", g, t)) + val(("RD", g, t)))
    for t in s.hours:
        line1 += s.grid.exchange_price * (val(("EXI", t)) + val(("EXE", t)))
        line1 += s.curtailment_price * val(("LC", t))
    line3 = sum(bu.reserve_price * (val(("RUDIS", b, t)) + val(("RUC", b, t)))
                for b, bu in enumerate(s.bess_units) for t in s.hours)
    line4 = line5 = line6 = 0.0
    if include_subhourly:
        dt = s.delta_h
        for g in range(len(s.thermal_units)):
            for t in s.hours:
                for d in s.segs:
                    line4 += dt * (pw[g].committed_cost * val(("I", g, t))
                                   + sum(pw[g].slopes[k]
                                         * val(("SEGH", g, t, d, k))
                                         for k in range(len(pw[g].slopes))))
        for b, bu in enumerate(s.bess_units):
            for t in s.hours:
                for d in s.segs:
                    line5 += dt * (bu.discharge_price * val(("PDISH", b, t, d))
                                   + bu.charge_price * val(("PCH", b, t, d)))
        line6 = sum(s.curtailment_price * s.delta_h * val(("SLC", t, d))
                    for t in s.hours for d in s.segs)
    line7 = sum(val(("ZT", t)) for t in s.hours)
    lines = dict(zip(COST_LINES, (line1, line2, line3, line4, line5, line6,
                                  line7)))
    lines["total"] = sum(lines.values())
    return lines


def _runs(bits: list[int]) -> list[tuple[int, int, int]]:
    """Maximal runs as (value, start 1-indexed, length)."""
    out = []
    start = 0
    for i in range(1, len(bits) + 1):
        if i == len(bits) or bits[i] != bits[start]:
            out.append((bits[start], start + 1, i - start))
            start = i
    return out


def check_schedule_invariants(s: Scenario, plan: CommitmentPlan,
                              sched: DispatchSchedule) -> list[str]:
    """Hard invariants on an extracted schedule; returns violation strings."""
    errs: list[str] = []
    T = s.n_hours
    for t in s.hours:
        lhs = (sum(sched.thermal_power[g][t - 1]
                   for g in range(len(s.thermal_units)))
               + sum(sched.pv_power[pu][t - 1]
                     for pu in range(len(s.pv_units)))
               + sum(sched.bess_discharge[b][t - 1] - sched.bess_charge[b][t - 1]
                     for b in range(len(s.bess_units)))
               + sched.exchange[t - 1] + sched.curtailment[t - 1])
        if abs(lhs - s.load.hourly_at(t)) > BALANCE_TOL:
            errs.append(f"(30) balance residual {lhs - s.load.hourly_at(t):.3e} at t={t}")
    if sched.has_subhourly:
        for t in s.hours:
            for d in s.segs:
                lhs = (sum(sched.sub_thermal[g][t - 1][d - 1]
                           for g in range(len(s.thermal_units)))
                       + sum(sched.sub_pv[pu][t - 1][d - 1]
                             for pu in range(len(s.pv_units)))
                       + sum(sched.sub_bess_discharge[b][t - 1][d - 1]
                             - sched.sub_bess_charge[b][t - 1][d - 1]
                             for b in range(len(s.bess_units)))
                       + sched.sub_exchange[t - 1][d - 1]
                       + sched.sub_curtailment[t - 1][d - 1])
                if abs(lhs - s.load.sub_at(t, d)) > BALANCE_TOL:
                    errs.append(f"(44) balance residual at t={t} d={d}")
        for t in sorted(pv_active_hours(s)):
            target = sum(sched.pv_power[pu][t - 1]
                         for pu in range(len(s.pv_units)))
            for d in s.segs:
                combined = (sum(sched.sub_pv[pu][t - 1][d - 1]
                                for pu in range(len(s.pv_units)))
                            + sum(sched.sub_bess_discharge[b][t - 1][d - 1]
                                  - sched.sub_bess_charge[b][t - 1][d - 1]
                                  for b in range(len(s.bess_units))))
                if abs(combined - target) > BALANCE_TOL:
                    errs.append(f"(43) constancy residual at t={t} d={d}")
    for b, bu in enumerate(s.bess_units):
        for t in s.hours:
            if (plan.bess_discharge_mode[b][t - 1]
                    + plan.bess_charge_mode[b][t - 1]) > 1:
                errs.append(f"(21) both bess modes on at b={b} t={t}")
        if abs(sched.bess_energy[b][T - 1] - bu.e_init) > ENERGY_TOL:
            errs.append(f"(29) terminal energy residual at b={b}")
    for g, u in enumerate(s.thermal_units):
        bits = list(plan.thermal_on[g])
        for value, start, length in _runs(bits):
            touches_end = start + length - 1 == T
            if touches_end:
                continue  # truncated at the horizon edge
            if start == 1:
                carry = u.init_hours if ((value == 1) == (u.init_status == "on")) else 0
                length += carry
            need = u.t_on if value == 1 else u.t_off
            if length < need:
                errs.append(f"min {'on' if value else 'off'} run of {length}h "
                            f"< {need}h for unit {u.name} at t={start}")
    if not s.grid.connected:
        if any(abs(v) > BALANCE_TOL for v in sched.exchange):
            errs.append("(16) nonzero exchange while islanded")
    else:
        if any(v > BALANCE_TOL for v in sched.curtailment):
            errs.append("(18) nonzero curtailment while grid-connected")
    total = sum(v for k, v in sched.cost_breakdown.items() if k != "total")
    if abs(total - sched.cost_breakdown["total"]) > COST_BREAKDOWN_TOL:
        errs.append("cost breakdown lines do not sum to total")
    return errs


def extract_schedule(s: Scenario, result: SolveResult, idx: VariableIndex,
                     n_segments: int = DEFAULT_SEGMENTS,
                     include_subhourly: bool = True
                     ) -> tuple[CommitmentPlan, DispatchSchedule]:
    """Round binaries, populate the plan/schedule pair, and gate on the
    schedule invariants."""
    if result.status != "optimal":
        raise ScheduleError(f"cannot extract from status {result.status!r}")
    x = result.primal
    pw = [piecewise_linearize_cost(u, n_segments) for u in s.thermal_units]

    def binary(key: tuple) -> int:
        v = idx.value(x, key)
        if abs(v - round(v)) > 10 * INTEGRALITY_TOL:
            raise ScheduleError(f"binary {key} = {v} beyond integrality "
                                "tolerance")
        return int(round(v))

    ng, nb, npv = len(s.thermal_units), len(s.bess_units), len(s.pv_units)
    hours = list(s.hours)
    segs = list(s.segs)
    plan = CommitmentPlan(
        thermal_on=tuple(tuple(binary(("I", g, t)) for t in hours)
                         for g in range(ng)),
        thermal_start=tuple(tuple(binary(("Y", g, t)) for t in hours)
                            for g in range(ng)),
        thermal_stop=tuple(tuple(binary(("Z", g, t)) for t in hours)
                           for g in range(ng)),
        bess_discharge_mode=tuple(tuple(binary(("IDIS", b, t)) for t in hours)
                                  for b in range(nb)),
        bess_charge_mode=tuple(tuple(binary(("IC", b, t)) for t in hours)
                               for b in range(nb)))

    def series(kind: str, n: int) -> tuple:
        return tuple(tuple(idx.value(x, (kind, i, t)) for t in hours)
                     for i in range(n))

    def sub_series(kind: str, n: int) -> tuple:
        if not include_subhourly:
            return tuple(tuple(tuple(0.0 for _ in segs) for _ in hours)
                         for _ in range(n))
        return tuple(tuple(tuple(idx.value(x, (kind, i, t, d)) for d in segs)
                           for t in hours) for i in range(n))

    def sub_flat(kind: str) -> tuple:
        if not include_subhourly:
            return tuple(tuple(0.0 for _ in segs) for _ in hours)
        return tuple(tuple(idx.value(x, (kind, t, d)) for d in segs)
                     for t in hours)

    breakdown = compute_cost_breakdown(s, idx, x, pw,
                                       include_subhourly=include_subhourly)
    if abs(breakdown["total"] - result.objective) > max(
            COST_BREAKDOWN_TOL, 1e-9 * abs(result.objective)) * 10:
        raise ScheduleError(
            f"cost breakdown {breakdown['total']:.8f} does not match "
            f"objective {result.objective:.8f}")
    sched = DispatchSchedule(
        thermal_power=series("P", ng),
        reserve_up=series("RU", ng),
        reserve_down=series("RD", ng),
        pv_power=series("PPV", npv),
        bess_discharge=series("PDIS", nb),
        bess_charge=series("PC", nb),
        bess_reserve_dis=series("RUDIS", nb),
        bess_reserve_ch=series("RUC", nb),
        bess_energy=series("E", nb),
        exchange=tuple(idx.value(x, ("PEX", t)) for t in hours),
        curtailment=tuple(idx.value(x, ("LC", t)) for t in hours),
        recourse_bound=tuple(idx.value(x, ("ZT", t)) for t in hours),
        sub_thermal=sub_series("PH", ng),
        sub_pv=sub_series("PPVH", npv),
        sub_bess_discharge=sub_series("PDISH", nb),
        sub_bess_charge=sub_series("PCH", nb),
        sub_bess_energy=sub_series("EH", nb),
        sub_exchange=sub_flat("PEXH"),
        sub_curtailment=sub_flat("LCH"),
        sub_curtail_slack=sub_flat("SLC"),
        sub_dis_status=sub_series("IDISH", nb),
        sub_ch_status=sub_series("ICH", nb),
        cost_breakdown=breakdown,
        total_cost=breakdown["total"],
        has_subhourly=include_subhourly)
    errs = check_schedule_invariants(s, plan, sched)
    if errs:
        raise ScheduleError("; ".join(errs))
    return plan, sched


def first_stage_values(s: Scenario, idx: VariableIndex, x: np.ndarray,
                       template: WcTemplate) -> dict[tuple, float]:
    """Values of every first-stage key the worst-case template references."""
    return {key: idx.value(x, key) for key in template.fs_keys}
