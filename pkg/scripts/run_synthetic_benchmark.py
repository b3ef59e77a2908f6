#!/usr/bin/env python3
"""Active sampling vs. random subsets over many synthetic datasets.

Reproduces the headline comparison behind the acceptance gate:

    python3 scripts/run_synthetic_benchmark.py --seeds 50 --random-subsets 100
"""

import argparse
import time

from casf.benchmark import run_benchmark


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=50, help="generator seed count")
    parser.add_argument("--samples", type=int, default=200)
    parser.add_argument("--systems", type=int, default=5)
    parser.add_argument("--aspects", type=int, default=2)
    parser.add_argument("--rate", type=float, default=0.5)
    parser.add_argument("--phases", type=int, default=5)
    parser.add_argument("--random-subsets", type=int, default=100)
    args = parser.parse_args()

    started = time.time()
    result = run_benchmark(
        range(args.seeds),
        n_samples=args.samples,
        n_systems=args.systems,
        n_aspects=args.aspects,
        rate=args.rate,
        phases=args.phases,
        n_random=args.random_subsets,
    )
    elapsed = time.time() - started

    print(f"{args.seeds} datasets, {elapsed:.0f}s")
    print(f"{'seed':>5}  {'casf':>7}  {'random':>7}  {'diff':>7}")
    for o in result.outcomes:
        print(
            f"{o.seed:>5}  {o.casf_tau:>7.4f}  {o.random_mean_tau:>7.4f}  "
            f"{o.casf_tau - o.random_mean_tau:>+7.4f}"
        )
    print(f"mean tau: casf {result.casf_mean:.4f}  random {result.random_mean:.4f}")
    print(f"gap: {result.gap:+.4f}")


if __name__ == "__main__":
    main()
