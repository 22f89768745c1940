"""Regenerate the bundled synthetic corpus under src/vertebrate/data/synthetic/."""

import argparse
from pathlib import Path

from vertebrate import synthetic

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "vertebrate" / "data" / "synthetic"

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    parser.add_argument("--seed", type=int, default=2021)
    args = parser.parse_args()
    path = synthetic.write(args.out, args.seed)
    print(f"wrote synthetic corpus to {path}")
