"""Altitude step under LQR for the five Q weight variants, no payload, no noise.

    python3 scripts/step_sweep.py [--out results/step_sweep.txt]
"""

import argparse
from pathlib import Path

from bicopter_lqg.report import format_step_table, summarize
from bicopter_lqg.scenarios import Q_VARIANTS, altitude_step_scenario, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, help="also write the table here")
    args = ap.parse_args()

    summaries = [summarize(run_scenario(altitude_step_scenario(q))) for q in Q_VARIANTS]
    table = format_step_table(summaries, [f"{q:g}*CtC" for q in Q_VARIANTS])
    print(table)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(table + "\n")


if __name__ == "__main__":
    main()
