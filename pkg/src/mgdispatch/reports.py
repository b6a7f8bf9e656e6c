"""CSV report writers. All output is byte-deterministic for a given run:
fixed column orders, fixed float formatting, no timestamps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .cg import CgResult, solve_worst_case_dispatch, stress_vertex
from .formulation import COST_LINES
from .rt_sced import RtReport
from .scenario import Scenario


def fmt(x: float) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_rows(path: Path, header: list[str], rows: list[list],
                footer: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
        if footer:
            for line in footer:
                fh.write(f"# {line}\n")


def write_commitment_csv(result: CgResult, path: Path) -> None:
    s = result.scenario
    plan = result.plan
    header = ["t"]
    for g, u in enumerate(s.thermal_units):
        header += [f"on_{u.name}", f"start_{u.name}", f"stop_{u.name}"]
    for b, bu in enumerate(s.bess_units):
        header += [f"dis_mode_{bu.name}", f"ch_mode_{bu.name}"]
    rows = []
    for t in s.hours:
        row: list = [t]
        for g in range(len(s.thermal_units)):
            row += [plan.thermal_on[g][t - 1], plan.thermal_start[g][t - 1],
                    plan.thermal_stop[g][t - 1]]
        for b in range(len(s.bess_units)):
            row += [plan.bess_discharge_mode[b][t - 1],
                    plan.bess_charge_mode[b][t - 1]]
        rows.append(row)
    _write_rows(path, header, rows)


def write_schedule_csv(result: CgResult, path: Path) -> None:
    """Hourly and sub-hourly dispatch in one long table; hourly rows carry
    an empty delta column."""
    s = result.scenario
    sch = result.schedule
    header = ["timescale", "t", "delta"]
    for u in s.thermal_units:
        header.append(f"p_{u.name}")
    for u in s.thermal_units:
        header += [f"ru_{u.name}", f"rd_{u.name}"]
    for i in range(len(s.pv_units)):
        header.append(f"pv_PV{i + 1}")
    for bu in s.bess_units:
        header += [f"dis_{bu.name}", f"ch_{bu.name}", f"e_{bu.name}"]
    header += ["exchange", "curtailment", "curtail_slack", "recourse_bound"]
    rows = []
    for t in s.hours:
        row: list = ["hourly", t, ""]
        for g in range(len(s.thermal_units)):
            row.append(sch.thermal_power[g][t - 1])
        for g in range(len(s.thermal_units)):
            row += [sch.reserve_up[g][t - 1], sch.reserve_down[g][t - 1]]
        for p in range(len(s.pv_units)):
            row.append(sch.pv_power[p][t - 1])
        for b in range(len(s.bess_units)):
            row += [sch.bess_discharge[b][t - 1], sch.bess_charge[b][t - 1],
                    sch.bess_energy[b][t - 1]]
        row += [sch.exchange[t - 1], sch.curtailment[t - 1], "",
                sch.recourse_bound[t - 1]]
        rows.append(row)
    if sch.has_subhourly:
        for t in s.hours:
            for d in s.segs:
                row = ["subhourly", t, d]
                for g in range(len(s.thermal_units)):
                    row.append(sch.sub_thermal[g][t - 1][d - 1])
                for g in range(len(s.thermal_units)):
                    row += ["", ""]
                for p in range(len(s.pv_units)):
                    row.append(sch.sub_pv[p][t - 1][d - 1])
                for b in range(len(s.bess_units)):
                    row += [sch.sub_bess_discharge[b][t - 1][d - 1],
                            sch.sub_bess_charge[b][t - 1][d - 1],
                            sch.sub_bess_energy[b][t - 1][d - 1]]
                row += [sch.sub_exchange[t - 1][d - 1],
                        sch.sub_curtailment[t - 1][d - 1],
                        sch.sub_curtail_slack[t - 1][d - 1], ""]
                rows.append(row)
    _write_rows(path, header, rows)


def write_costs_csv(result: CgResult, path: Path) -> None:
    rows = [[name, result.schedule.cost_breakdown[name]]
            for name in COST_LINES]
    rows.append(["total", result.schedule.cost_breakdown["total"]])
    _write_rows(path, ["line", "cost_dollars"], rows)


def write_cg_trace_csv(result: CgResult, path: Path) -> None:
    rows = [[it.iteration, it.master_objective, it.omega, it.point_id]
            for it in result.trace.iterations]
    _write_rows(path, ["iteration", "master_objective", "omega", "point_id"],
                rows, footer=[f"status={result.trace.status}"])


@dataclass
class CostTable:
    """Per-category base/worst/sub-hourly costs, Table 4-7 layout."""

    thermal_base: float
    thermal_worst: float
    thermal_sub: float
    bess_base: float
    bess_worst: float
    bess_sub: float


def cost_table(result: CgResult, engine: str = "auto") -> CostTable:
    """Aggregate unit costs in the day-ahead base case, the worst case, and
    the sub-hourly case.

    Worst-case columns come from the minimum-cost recourse at the all-up
    stress vertex. The BESS worst-case figure counts the recourse BESS
    throughput over the PV-active window, where the solar-storage constancy
    pins the battery to its uncertainty-tracking duty; outside the window
    the recourse merely mirrors base-case cycling.
    """
    s = result.scenario
    sch = result.schedule
    from .formulation import piecewise_linearize_cost
    pws = [piecewise_linearize_cost(u, result.config.n_segments)
           for u in s.thermal_units]
    thermal_base = 0.0
    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            if result.plan.thermal_on[g][t - 1]:
                thermal_base += pws[g].value(sch.thermal_power[g][t - 1])
            thermal_base += (u.su_cost * result.plan.thermal_start[g][t - 1]
                             + u.sd_cost * result.plan.thermal_stop[g][t - 1])
    bess_base = sum(
        bu.discharge_price * sch.bess_discharge[b][t - 1]
        + bu.charge_price * sch.bess_charge[b][t - 1]
        for b, bu in enumerate(s.bess_units) for t in s.hours)
    thermal_sub = sch.cost_breakdown["subhourly_thermal"]
    bess_sub = sch.cost_breakdown["subhourly_bess"]
    wc = solve_worst_case_dispatch(s, result.plan, sch, stress_vertex(s),
                                   n_segments=result.config.n_segments,
                                   engine=engine)
    from .scenario import pv_active_hours
    active = pv_active_hours(s)
    bess_worst = sum(
        bu.discharge_price * wc.values[("WPDIS", b, t)]
        + bu.charge_price * wc.values[("WPC", b, t)]
        for b, bu in enumerate(s.bess_units) for t in active)
    return CostTable(thermal_base=thermal_base, thermal_worst=wc.thermal_cost,
                     thermal_sub=thermal_sub, bess_base=bess_base,
                     bess_worst=bess_worst, bess_sub=bess_sub)


def write_sweep_csv(rates: list[float], which: str, tables: list[CostTable],
                    objectives: list[float], path: Path) -> None:
    header = [which, "thermal_base", "thermal_worst", "thermal_sub",
              "bess_base", "bess_worst", "bess_sub", "robust_objective"]
    rows = []
    for rate, tab, obj in zip(rates, tables, objectives):
        rows.append([rate, tab.thermal_base, tab.thermal_worst,
                     tab.thermal_sub, tab.bess_base, tab.bess_worst,
                     tab.bess_sub, obj])
    footer = []
    for col, vals in (("thermal_worst", [t.thermal_worst for t in tables]),
                      ("bess_worst", [t.bess_worst for t in tables]),
                      ("robust_objective", objectives)):
        mono = all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
        footer.append(f"monotone_nondecreasing[{col}]={str(mono).lower()}")
    _write_rows(path, header, rows, footer=footer)


def write_rt_report_csv(reports: list[RtReport], path: Path) -> None:
    header = ["arm", "interval", "hour", "seg", "thermal_cost",
              "thermal_penalty", "bess_cost", "bess_penalty", "exchange_cost",
              "shed_cost", "total", "exchange_kw", "curtailment_kw"]
    rows = []
    for rep in reports:
        for r in rep.intervals:
            rows.append([rep.label, r.interval, r.hour, r.seg, r.thermal_cost,
                         r.thermal_penalty, r.bess_cost, r.bess_penalty,
                         r.exchange_cost, r.shed_cost, r.total, r.exchange,
                         r.curtailment])
    footer = []
    for rep in reports:
        tot = rep.category_totals()
        footer.append(
            f"totals[{rep.label}]: bess={fmt(tot['bess'])} "
            f"thermal={fmt(tot['thermal'])} exchange={fmt(tot['exchange'])} "
            f"load_shedding={fmt(tot['load_shedding'])} "
            f"total={fmt(tot['total'])}")
        footer.append(f"baseline[{rep.label}]: {rep.baseline_note}")
    _write_rows(path, header, rows, footer=footer)


def write_energy_trace_csv(reports: list[RtReport], s: Scenario,
                           path: Path) -> None:
    header = ["arm", "interval", "hour", "seg"]
    for b, bu in enumerate(s.bess_units):
        header.append(f"energy_{bu.name}")
    rows = []
    for rep in reports:
        for r in rep.intervals:
            rows.append([rep.label, r.interval, r.hour, r.seg,
                         *r.bess_energy])
    _write_rows(path, header, rows)


def write_solar_storage_csv(result: CgResult, path: Path) -> None:
    """Combined sub-hourly solar-storage output next to the hourly PV
    dispatch target and the hourly forecast."""
    s = result.scenario
    sch = result.schedule
    rows = []
    for t in s.hours:
        target = sum(sch.pv_power[p][t - 1] for p in range(len(s.pv_units)))
        forecast = sum(prof.hourly_at(t) for prof in s.pv_units)
        for d in s.segs:
            combined = (sum(sch.sub_pv[p][t - 1][d - 1]
                            for p in range(len(s.pv_units)))
                        + sum(sch.sub_bess_discharge[b][t - 1][d - 1]
                              - sch.sub_bess_charge[b][t - 1][d - 1]
                              for b in range(len(s.bess_units))))
            rows.append([t, d, combined, target, forecast])
    _write_rows(path, ["t", "delta", "combined_output", "hourly_pv_dispatch",
                       "hourly_pv_forecast"], rows)
