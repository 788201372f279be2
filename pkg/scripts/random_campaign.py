#!/usr/bin/env python3
"""Randomized equivalence campaign: coordinated pipeline vs joint dispatch.

Usage:
    python scripts/random_campaign.py [--cases 200] [--seed 0] [--tol 1e-6]

Generates seeded random scenarios (radial trees up to 12 nodes, convex
stacks, non-binding voltages), runs both pipelines on each, and reports the
deviation distribution. Exit code 0 when every case passes.
"""

import argparse
import sys
import time

sys.path.insert(0, str(__import__("pathlib").Path(__file__).resolve().parents[1] / "tests"))

from support import random_scenario  # noqa: E402

from gridcoord import check_equivalence  # noqa: E402


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cases", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0, help="first seed of the batch")
    parser.add_argument("--tol", type=float, default=1e-6)
    args = parser.parse_args(argv)

    start = time.time()
    deviations = []
    failures = []
    for seed in range(args.seed, args.seed + args.cases):
        result = check_equivalence(random_scenario(seed), tolerance=args.tol)
        report = result.equivalence
        deviations.append(report.max_deviation)
        if not report.passed:
            failures.append(seed)
            print(f"seed {seed}: FAIL (max deviation {report.max_deviation:.3g})")

    deviations.sort()
    n = len(deviations)
    print(f"\n{n - len(failures)}/{n} cases equivalent at tolerance {args.tol:g}")
    print(f"  deviation median {deviations[n // 2]:.3g}, "
          f"p95 {deviations[int(0.95 * (n - 1))]:.3g}, max {deviations[-1]:.3g}")
    print(f"  elapsed {time.time() - start:.1f}s")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
