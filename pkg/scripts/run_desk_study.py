#!/usr/bin/env python3
"""Reproduce the desk-scale experiment battery into out/desk_study/:

  - beta sweeps (grid + island) and an alpha sweep (grid), table-style CSVs
  - a converged day-ahead run per mode with plots
  - real-time comparisons: with/without reserve and multi/single timescale
    (islanded, load-perturbed realizations)

Runs the CLI end to end; expects scenarios/ from scripts/make_scenarios.py.
"""

import subprocess
import sys
from pathlib import Path

SCEN = Path("scenarios")
OUT = Path("out/desk_study")


def run(*argv: str) -> None:
    cmd = [sys.executable, "-m", "mgdispatch.cli", *argv]
    print("+", " ".join(argv))
    subprocess.run(cmd, check=True)


def main() -> None:
    if not (SCEN / "desk_grid.json").exists():
        sys.exit("run scripts/make_scenarios.py first")
    OUT.mkdir(parents=True, exist_ok=True)

    for mode, scen in (("grid", "desk_grid.json"), ("island", "desk_island.json")):
        run("sweep", "--scenario", str(SCEN / scen), "--sweep", "beta",
            "--values", "0.05", "--values", "0.10", "--values", "0.15",
            "--alpha", "0.05", "--out", str(OUT / f"beta_sweep_{mode}"))
    run("sweep", "--scenario", str(SCEN / "desk_grid.json"), "--sweep",
        "alpha", "--values", "0.05", "--values", "0.10", "--values", "0.15",
        "--beta", "0.05", "--out", str(OUT / "alpha_sweep_grid"))

    for mode, scen in (("grid", "desk_grid.json"), ("island", "desk_island.json")):
        d = OUT / f"dayahead_{mode}"
        run("dayahead", "--scenario", str(SCEN / scen), "--alpha", "0.05",
            "--beta", "0.05", "--out", str(d), "--export-lp")
        run("plot", "--out", str(d))

    rt = OUT / "rt_reserve_island"
    run("realtime", "--scenario", str(SCEN / "desk_island.json"),
        "--alpha", "0", "--beta", "0.05", "--compare", "reserve",
        "--realized", "perturbed", "--seed", "7", "--out", str(rt))
    run("plot", "--out", str(rt))
    run("realtime", "--scenario", str(SCEN / "desk_island.json"),
        "--alpha", "0.05", "--beta", "0.05", "--compare", "timescale",
        "--realized", "perturbed", "--seed", "7",
        "--out", str(OUT / "rt_timescale_island"))
    print(f"study complete under {OUT}/")


if __name__ == "__main__":
    main()
