"""Sweep (α, β) for (P)- and print the outcome and boundary exponent table.

Usage: python scripts/existence_map.py [--ball] [--jobs N] [--csv out.csv]
"""
import argparse
import math

import numpy as np

from singconv.cli import SweepConfig, results_to_csv, sweep
from singconv.model import Geometry, classify_regime


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ball", action="store_true", help="unit ball in R^3 instead of (0, 1)")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--csv", help="also write the rows as CSV")
    args = ap.parse_args()
    values = tuple(np.round(np.arange(0.25, 2.51, 0.25), 2))
    geometry = Geometry.ball(1.0, 3) if args.ball else Geometry.interval()
    cfg = SweepConfig(alphas=values, betas=values[:7], geometry=geometry)
    rows = sweep(cfg, jobs=args.jobs)
    print(f"{'alpha':>6} {'beta':>6} {'regime':>11} {'outcome':>21} {'exponent':>9}")
    for r in rows:
        regime = classify_regime(r.alpha, r.beta).regime
        exp = "" if math.isnan(r.exponent) else f"{r.exponent:.4f}"
        print(f"{r.alpha:6.2f} {r.beta:6.2f} {regime:>11} {r.outcome:>21} {exp:>9}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(results_to_csv(rows))


if __name__ == "__main__":
    main()
