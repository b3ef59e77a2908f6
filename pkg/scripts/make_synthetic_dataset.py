#!/usr/bin/env python3
"""Write a synthetic evaluation dataset with known latent quality to JSONL.

Example:
    python3 scripts/make_synthetic_dataset.py --seed 0 --samples 200 --out data.jsonl
"""

import argparse
from pathlib import Path

from casf.dataset import serialize_dataset
from casf.synthetic import make_synthetic_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--samples", type=int, default=200)
    parser.add_argument("--systems", type=int, default=5)
    parser.add_argument("--aspects", type=int, default=2)
    parser.add_argument("--out", type=Path, required=True)
    args = parser.parse_args()

    dataset = make_synthetic_dataset(
        args.seed,
        n_samples=args.samples,
        n_systems=args.systems,
        n_aspects=args.aspects,
    )
    args.out.write_text(serialize_dataset(dataset), encoding="utf-8")
    print(
        f"wrote {dataset.n_samples} samples x {len(dataset.systems)} systems "
        f"x {len(dataset.aspects)} aspects to {args.out}"
    )


if __name__ == "__main__":
    main()
