"""Command-line entry point: batch experiments over scenario files.

Subcommands: dayahead (robust commitment + dispatch), realtime (rolling
dispatch simulation), sweep (uncertainty-rate sweeps), plot (SVG charts
from run outputs), replay (re-run a manifest). Every run writes a
manifest.json; all CSV outputs are byte-deterministic, wall times live
only in the manifest.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .cg import CgConfig, CgError, cg_solve
from .engine import export_lp_file
from .formulation import ScheduleError
from .profiles import perturb_profiles
from .reports import (cost_table, write_cg_trace_csv, write_commitment_csv,
                      write_costs_csv, write_energy_trace_csv,
                      write_rt_report_csv, write_schedule_csv,
                      write_solar_storage_csv, write_sweep_csv)
from .rt_sced import RtConfig, RtSimulationError, roll_horizon
from .scenario import Scenario, ScenarioValidationError
from .scenario_io import ScenarioFileError, load_scenario
from .svg_plots import write_line_chart

log = logging.getLogger("dispatch")


def _setup_logging() -> None:
    level = os.environ.get("DISPATCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _load(args) -> Scenario:
    s = load_scenario(args.scenario)
    if args.mode is not None:
        s = s.with_mode(args.mode == "grid")
    alpha = s.alpha if args.alpha is None else args.alpha
    beta = s.beta if args.beta is None else args.beta
    s = s.with_rates(alpha, beta)
    if args.dt is not None and args.dt != s.sub_step_minutes:
        raise ScenarioFileError(
            f"scenario profiles are sampled at dt={s.sub_step_minutes} min; "
            f"regenerate the scenario for dt={args.dt}")
    return s


def _cg_config(args) -> CgConfig:
    return CgConfig(n_segments=args.segments, engine=args.engine,
                    oracle=args.oracle)


def _write_manifest(args, outdir: Path, command: str, wall: float,
                    outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "scenario": str(args.scenario),
        "overrides": {
            "mode": args.mode, "alpha": args.alpha, "beta": args.beta,
            "segments": args.segments, "dt": args.dt,
            "window": getattr(args, "window", None),
            "seed": getattr(args, "seed", None),
            "realized": getattr(args, "realized", None),
            "compare": getattr(args, "compare", None),
            "export_lp": getattr(args, "export_lp", False),
            "oracle": args.oracle, "engine": args.engine,
            "sweep": getattr(args, "sweep", None),
            "values": getattr(args, "values", None),
            "span": list(getattr(args, "span", ())) or None,
            "perturb_pv": getattr(args, "perturb_pv", False),
        },
        "out": str(outdir),
        "version": __version__,
        "wall_time_s": round(wall, 3),
        "outputs": outputs,
    }
    tmp = outdir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=1) + "\n")
    tmp.replace(outdir / "manifest.json")


def _run_dayahead(args) -> int:
    t0 = time.monotonic()
    s = _load(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    result = cg_solve(s, _cg_config(args))
    outputs = ["schedule.csv", "commitment.csv", "costs.csv", "cg_trace.csv",
               "solar_storage.csv"]
    write_schedule_csv(result, outdir / "schedule.csv")
    write_commitment_csv(result, outdir / "commitment.csv")
    write_costs_csv(result, outdir / "costs.csv")
    write_cg_trace_csv(result, outdir / "cg_trace.csv")
    write_solar_storage_csv(result, outdir / "solar_storage.csv")
    if args.export_lp:
        export_lp_file(result.master_problem, str(outdir / "master.lp"))
        outputs.append("master.lp")
    _write_manifest(args, outdir, "dayahead", time.monotonic() - t0, outputs)
    log.info("dayahead solved: objective %.2f, %s",
             result.objective, result.trace.status)
    if not result.converged:
        print(json.dumps({"warning": "iteration_cap",
                          "message": "CG hit the iteration cap; schedule is "
                                     "not certified robust"}),
              file=sys.stderr)
    return 0


def _realized(s: Scenario, args):
    if args.realized == "forecast":
        return s.pv_units, s.load
    return perturb_profiles(s.pv_units, s.load, s.alpha, s.beta,
                            seed=args.seed, perturb_pv=args.perturb_pv,
                            perturb_load=True)


def _run_realtime(args) -> int:
    t0 = time.monotonic()
    s = _load(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = RtConfig(window_intervals=args.window, engine=args.engine,
                   span_start_hour=args.span[0], span_end_hour=args.span[1])
    realized_pv, realized_load = _realized(s, args)
    reports = []
    if args.compare == "reserve":
        robust = cg_solve(s, _cg_config(args))
        det = cg_solve(s, replace(_cg_config(args), robust=False,
                                  fix_zero_reserves=True))
        reports.append(roll_horizon(
            s, robust.plan, robust.schedule, realized_pv, realized_load,
            replace(cfg, use_reserve=True, label="with_reserve")))
        reports.append(roll_horizon(
            s, det.plan, det.schedule, realized_pv, realized_load,
            replace(cfg, use_reserve=False, label="without_reserve")))
    elif args.compare == "timescale":
        multi = cg_solve(s, _cg_config(args))
        single = cg_solve(s, replace(_cg_config(args),
                                     include_subhourly=False))
        from .rt_sced import compare_plans
        rep_m, rep_s = compare_plans(s, multi.plan, multi.schedule,
                                     single.plan, single.schedule,
                                     realized_pv, realized_load, cfg)
        reports += [rep_m, rep_s]
    else:
        result = cg_solve(s, _cg_config(args))
        reports.append(roll_horizon(s, result.plan, result.schedule,
                                    realized_pv, realized_load, cfg))
    write_rt_report_csv(reports, outdir / "rt_report.csv")
    write_energy_trace_csv(reports, s, outdir / "energy_trace.csv")
    _write_manifest(args, outdir, "realtime", time.monotonic() - t0,
                    ["rt_report.csv", "energy_trace.csv"])
    return 0


def _run_sweep(args) -> int:
    t0 = time.monotonic()
    s = _load(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rates = args.values
    which = args.sweep
    tables, objectives = [], []
    for rate in rates:
        si = s.with_rates(rate, s.beta) if which == "alpha" \
            else s.with_rates(s.alpha, rate)
        result = cg_solve(si, _cg_config(args))
        tables.append(cost_table(result, engine=args.engine))
        objectives.append(result.objective)
    write_sweep_csv(rates, which, tables, objectives, outdir / "sweep.csv")
    _write_manifest(args, outdir, "sweep", time.monotonic() - t0,
                    ["sweep.csv"])
    return 0


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    import csv as _csv
    with open(path, newline="") as fh:
        rows = [r for r in _csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


def _run_plot(args) -> int:
    t0 = time.monotonic()
    outdir = Path(args.out)
    outputs = []
    ss_path = outdir / "solar_storage.csv"
    if ss_path.exists():
        header, rows = _read_csv(ss_path)
        col = {name: i for i, name in enumerate(header)}
        xs = [float(r[col["t"]]) + (float(r[col["delta"]]) - 1)
              / max(1, len({rr[col["delta"]] for rr in rows})) for r in rows]
        combined = [float(r[col["combined_output"]]) for r in rows]
        target = [float(r[col["hourly_pv_dispatch"]]) for r in rows]
        forecast = [float(r[col["hourly_pv_forecast"]]) for r in rows]
        gap = max((abs(c - t) for c, t in zip(combined, target)),
                  default=0.0)
        write_line_chart(
            outdir / "solar_storage.svg",
            [("combined solar-storage output", xs, combined),
             ("hourly PV dispatch target", xs, target),
             ("hourly PV forecast", xs, forecast)],
            title="Solar-storage output",
            xlabel="hour", ylabel="kW",
            annotations=[f"max gap to target = {gap:.3g} kW"])
        outputs.append("solar_storage.svg")
    et_path = outdir / "energy_trace.csv"
    if et_path.exists():
        header, rows = _read_csv(et_path)
        col = {name: i for i, name in enumerate(header)}
        energy_cols = [name for name in header if name.startswith("energy_")]
        series = []
        arms = sorted({r[col["arm"]] for r in rows}) if rows else []
        for arm in arms or [""]:
            sel = [r for r in rows if not arms or r[col["arm"]] == arm]
            xs = [float(r[col["interval"]]) for r in sel]
            for ec in energy_cols:
                label = f"{arm} {ec[7:]}".strip()
                series.append((label, xs, [float(r[col[ec]]) for r in sel]))
        write_line_chart(outdir / "bess_energy.svg", series,
                         title="Energy stored in the BESS units",
                         xlabel="interval", ylabel="kWh")
        outputs.append("bess_energy.svg")
    if not outputs:
        return _error("missing_input",
                      f"no solar_storage.csv or energy_trace.csv in {outdir}",
                      2)
    _write_manifest(args, outdir, "plot", time.monotonic() - t0, outputs)
    return 0


def _run_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    command = manifest["command"]
    if command == "plot":
        return main(["plot", "--out", args.out or manifest["out"]])
    argv = [command, "--scenario", manifest["scenario"],
            "--out", args.out or manifest["out"]]
    ov = manifest.get("overrides", {})
    common = {"mode": "--mode", "alpha": "--alpha", "beta": "--beta",
              "segments": "--segments", "dt": "--dt", "seed": "--seed",
              "engine": "--engine"}
    per_command = {"realtime": {"window": "--window",
                                "realized": "--realized",
                                "compare": "--compare"}}
    flags = dict(common, **per_command.get(command, {}))
    for key, flag in flags.items():
        val = ov.get(key)
        if val is not None:
            argv += [flag, str(val)]
    if ov.get("export_lp") and command == "dayahead":
        argv.append("--export-lp")
    if ov.get("oracle"):
        argv.append("--oracle")
    if command == "realtime":
        if ov.get("perturb_pv"):
            argv.append("--perturb-pv")
        if ov.get("span"):
            argv += ["--span", str(ov["span"][0]), str(ov["span"][1])]
    if command == "sweep":
        argv += ["--sweep", ov.get("sweep") or "beta"]
        for v in ov.get("values") or []:
            argv += ["--values", str(v)]
    return main(argv)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument("--mode", choices=["grid", "island"], default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--segments", type=int, default=4,
                   help="piecewise cost segments")
    p.add_argument("--dt", type=int, default=None,
                   help="sub-hourly step, minutes (must match the scenario)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--engine", choices=["auto", "simplex", "highs"],
                   default="auto")
    p.add_argument("--oracle", action="store_true",
                   help="solve the subproblem by vertex enumeration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispatch",
        description="Robust multi-timescale microgrid dispatch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dayahead", help="day-ahead robust solve")
    _add_common(p)
    p.add_argument("--export-lp", action="store_true",
                   help="also write the master model in LP format")
    p.set_defaults(func=_run_dayahead)

    p = sub.add_parser("realtime", help="rolling real-time dispatch")
    _add_common(p)
    p.add_argument("--window", type=int, default=5,
                   help="look-ahead intervals per window")
    p.add_argument("--realized", default="perturbed",
                   choices=["forecast", "perturbed"])
    p.add_argument("--perturb-pv", action="store_true",
                   help="also perturb PV (hourly box draws)")
    p.add_argument("--compare", choices=["reserve", "timescale"],
                   default=None)
    p.add_argument("--span", type=int, nargs=2, default=(7, 18),
                   metavar=("FIRST_HOUR", "LAST_HOUR"))
    p.set_defaults(func=_run_realtime)

    p = sub.add_parser("sweep", help="uncertainty-rate sweep")
    _add_common(p)
    p.add_argument("--sweep", choices=["alpha", "beta"], required=True)
    p.add_argument("--values", type=float, action="append", required=True,
                   help="one rate per flag occurrence")
    p.set_defaults(func=_run_sweep)

    p = sub.add_parser("plot", help="render SVG charts from run outputs")
    p.add_argument("--out", required=True,
                   help="directory holding the run's CSV outputs")
    p.set_defaults(func=_run_plot, scenario="", mode=None, alpha=None,
                   beta=None, segments=4, dt=None, oracle=False,
                   engine="auto")

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None,
                   help="override the output directory")
    p.set_defaults(func=_run_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioValidationError, ScenarioFileError) as exc:
        return _error("validation", str(exc), 2)
    except (CgError, ScheduleError, RtSimulationError) as exc:
        return _error("solver", str(exc), 3)
    except OSError as exc:
        return _error("io", str(exc), 4)


if __name__ == "__main__":
    sys.exit(main())
