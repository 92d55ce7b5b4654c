"""Paired LQR/LQG tracking runs with the payload attached and noise on.

Each seed drives both controllers with the same noise realisation. The
LQG feedback gain is synthesised both ways so the effect of the design
choice can be seen next to the baseline.

    python3 scripts/tracking_comparison.py --kind circle --seeds 5
"""

import argparse
from dataclasses import replace

import numpy as np

from bicopter_lqg.lqg import KSynthesis
from bicopter_lqg.report import compare, format_comparison
from bicopter_lqg.scenarios import tracking_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=["circle", "figure8"], default="circle")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--window", choices=["full", "post"], default="full")
    args = ap.parse_args()

    base = tracking_scenario(args.kind)
    for ks in KSynthesis:
        s = replace(base, controller=replace(base.controller, k_synthesis=ks))
        rows = compare(s, range(args.seeds))
        print(f"== {args.kind}, K synthesis: {ks.value}")
        print(format_comparison(rows, args.window))
        for r in rows:
            if r.lqg.status != "ok":
                print(f"   seed {r.seed}: LQG {r.lqg.status} ({r.lqg.message})")
        med = np.median([r.improvement("x", args.window) for r in rows])
        print(f"median x improvement {100 * med:.1f} %\n")


if __name__ == "__main__":
    main()
