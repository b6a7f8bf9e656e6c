#!/usr/bin/env python3
"""Write the built-in study scenarios as JSON files under scenarios/."""

import argparse
from pathlib import Path

from mgdispatch.case_study import desk_scenario, tiny_scenario, toy_scenario
from mgdispatch.scenario_io import save_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="scenarios", help="target directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(desk_scenario(connected=True), out / "desk_grid.json")
    save_scenario(desk_scenario(connected=False), out / "desk_island.json")
    save_scenario(toy_scenario(), out / "toy.json")
    save_scenario(tiny_scenario(), out / "tiny.json")
    print(f"wrote 4 scenarios to {out}/")


if __name__ == "__main__":
    main()
