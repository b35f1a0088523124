#!/usr/bin/env python3
"""Optimization ablation over the bundled programs.

Runs every bundled scope once per optimization setting and prints a table
of solver calls / generated tests / wall time, mirroring the experiment
layout used to compare the engine's optimizations.
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from defcalc.explorer import ExploreConfig, OPT_NAMES, explore
from defcalc.parser import parse_or_raise

PROGRAMS = [
    ("fig5.dfc", "Main"),
    ("income_tax.dfc", "IncomeTax"),
    ("geo_match.dfc", "Housing"),
    ("trivial_just.dfc", "Fees"),
    ("soft_money.dfc", "Subsidy"),
    ("benefits_medium.dfc", "Benefits"),
]

ROWS = [("none", [])] + [(n, [n]) for n in OPT_NAMES] + [("all", list(OPT_NAMES))]


def main() -> int:
    root = Path(__file__).resolve().parent.parent / "programs"
    print(f"{'opts':<14}", end="")
    for name, _ in PROGRAMS:
        print(f"{name.removesuffix('.dfc'):>24}", end="")
    print()
    for label, opts in ROWS:
        print(f"{label:<14}", end="")
        for fname, scope in PROGRAMS:
            program = parse_or_raise((root / fname).read_text())
            config = ExploreConfig.from_opt_names(opts)
            t0 = time.monotonic()
            suite = explore(program, scope, config)
            dt = time.monotonic() - t0
            cell = f"{suite.stats.solver_calls}c/{suite.stats.tests}t/{dt:.2f}s"
            print(f"{cell:>24}", end="")
        print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
