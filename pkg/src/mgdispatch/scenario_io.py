"""Scenario JSON loading and saving.

A scenario file is one JSON document mirroring the Scenario fields;
profiles are either inline arrays or references to CSV files (one column
per series, header row, values in kW). The machine-readable field list
ships as schema/scenario.schema.json next to this module.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .scenario import (BessUnit, GridInterface, Profile, Scenario,
                       ThermalUnit, validate_scenario)


class ScenarioFileError(ValueError):
    pass


def _read_csv_column(path: Path, column: str) -> list[float]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ScenarioFileError(f"{path}: no column {column!r}")
        return [float(row[column]) for row in reader]


def _load_profile(spec: dict, base: Path, n_hours: int,
                  n_seg: int, name: str) -> Profile:
    if "hourly" in spec:
        hourly = [float(v) for v in spec["hourly"]]
    elif "hourly_csv" in spec:
        hourly = _read_csv_column(base / spec["hourly_csv"],
                                  spec.get("column", name))
    else:
        raise ScenarioFileError(f"profile {name}: need 'hourly' or 'hourly_csv'")
    if "sub_hourly" in spec:
        sub = [[float(v) for v in row] for row in spec["sub_hourly"]]
    elif "sub_hourly_csv" in spec:
        flat = _read_csv_column(base / spec["sub_hourly_csv"],
                                spec.get("column", name))
        if len(flat) != n_hours * n_seg:
            raise ScenarioFileError(
                f"profile {name}: sub-hourly CSV has {len(flat)} rows, "
                f"expected {n_hours * n_seg}")
        sub = [flat[i * n_seg:(i + 1) * n_seg] for i in range(n_hours)]
    else:
        # flat refinement of the hourly series
        sub = [[h] * n_seg for h in hourly]
    return Profile(hourly=tuple(hourly),
                   sub_hourly=tuple(tuple(r) for r in sub))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"{path}: invalid JSON ({exc})") from exc
    base = path.parent
    try:
        n_hours = int(doc["n_hours"])
        dt = int(doc.get("sub_step_minutes", 5))
        n_seg = 60 // dt if dt > 0 and 60 % dt == 0 else 1
        thermal = tuple(ThermalUnit(
            name=u.get("name", f"G{i + 1}"), a=float(u["a"]), b=float(u["b"]),
            c=float(u["c"]), p_min=float(u["p_min"]), p_max=float(u["p_max"]),
            ramp_up=float(u["ramp_up"]), ramp_down=float(u["ramp_down"]),
            t_on=int(u["t_on"]), t_off=int(u["t_off"]),
            su_cost=float(u["su_cost"]), sd_cost=float(u["sd_cost"]),
            reserve_price=float(u["reserve_price"]),
            init_status=str(u["init_status"]),
            init_hours=int(u["init_hours"]), init_power=float(u["init_power"]))
            for i, u in enumerate(doc["thermal_units"]))
        bess = tuple(BessUnit(
            name=b.get("name", f"B{i + 1}"), e_min=float(b["e_min"]),
            e_max=float(b["e_max"]), e_cap=float(b["e_cap"]),
            e_init=float(b["e_init"]),
            p_charge_max=float(b["p_charge_max"]),
            p_discharge_max=float(b["p_discharge_max"]),
            eta_c=float(b["eta_c"]), eta_dis=float(b["eta_dis"]),
            charge_price=float(b["charge_price"]),
            discharge_price=float(b["discharge_price"]),
            reserve_price=float(b["reserve_price"]))
            for i, b in enumerate(doc["bess_units"]))
        pv = tuple(_load_profile(p, base, n_hours, n_seg,
                                 p.get("name", f"PV{i + 1}"))
                   for i, p in enumerate(doc["pv_units"]))
        load = _load_profile(doc["load"], base, n_hours, n_seg, "load")
        g = doc["grid"]
        grid = GridInterface(p_ex_max=float(g["p_ex_max"]),
                             k_ex=float(g["k_ex"]),
                             exchange_price=float(g["exchange_price"]),
                             connected=bool(g["connected"]))
        scenario = Scenario(
            thermal_units=thermal, bess_units=bess, pv_units=pv, load=load,
            critical_load_fraction=float(doc.get("critical_load_fraction", 0.5)),
            grid=grid, curtailment_price=float(doc["curtailment_price"]),
            n_hours=n_hours, sub_step_minutes=dt,
            alpha=float(doc.get("alpha", 0.0)),
            beta=float(doc.get("beta", 0.0)),
            name=str(doc.get("name", path.stem)))
    except KeyError as exc:
        raise ScenarioFileError(f"{path}: missing field {exc}") from exc
    return validate_scenario(scenario)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "n_hours": s.n_hours,
        "sub_step_minutes": s.sub_step_minutes,
        "alpha": s.alpha,
        "beta": s.beta,
        "critical_load_fraction": s.critical_load_fraction,
        "curtailment_price": s.curtailment_price,
        "grid": {"p_ex_max": s.grid.p_ex_max, "k_ex": s.grid.k_ex,
                 "exchange_price": s.grid.exchange_price,
                 "connected": s.grid.connected},
        "thermal_units": [{
            "name": u.name, "a": u.a, "b": u.b, "c": u.c,
            "p_min": u.p_min, "p_max": u.p_max, "ramp_up": u.ramp_up,
            "ramp_down": u.ramp_down, "t_on": u.t_on, "t_off": u.t_off,
            "su_cost": u.su_cost, "sd_cost": u.sd_cost,
            "reserve_price": u.reserve_price, "init_status": u.init_status,
            "init_hours": u.init_hours, "init_power": u.init_power}
            for u in s.thermal_units],
        "bess_units": [{
            "name": b.name, "e_min": b.e_min, "e_max": b.e_max,
            "e_cap": b.e_cap, "e_init": b.e_init,
            "p_charge_max": b.p_charge_max,
            "p_discharge_max": b.p_discharge_max, "eta_c": b.eta_c,
            "eta_dis": b.eta_dis, "charge_price": b.charge_price,
            "discharge_price": b.discharge_price,
            "reserve_price": b.reserve_price} for b in s.bess_units],
        "pv_units": [{"name": f"PV{i + 1}", "hourly": list(p.hourly),
                      "sub_hourly": [list(r) for r in p.sub_hourly]}
                     for i, p in enumerate(s.pv_units)],
        "load": {"hourly": list(s.load.hourly),
                 "sub_hourly": [list(r) for r in s.load.sub_hourly]},
    }


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=1) + "\n")
