"""Train and evaluate under both split orders and print mean test kappa per model.

Oversampling before the split lets replicas of one minority comment land in
both folds; splitting first keeps the test fold free of them. The gap between
the two columns is a rough measure of that leakage.
"""

import argparse
import csv
import tempfile
from pathlib import Path

from vertebrate.cli import main


def mean_kappas(out: Path) -> dict[str, float]:
    with open(out / "evaluate" / "evaluation.csv", encoding="utf-8") as fh:
        return {r["model"]: float(r["kappa"]) for r in csv.DictReader(fh) if r["seed"] == "AVERAGE"}


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="pipeline config (default: bundled synthetic corpus)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V")
    args = parser.parse_args()

    common = (["--config", args.config] if args.config else []) + [x for o in args.overrides for x in ("--set", o)]
    results = {}
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp) / "oversample_first"
        for stage in ("topics", "clades", "label", "train", "evaluate"):
            if main([stage, "--out", str(base), *common]) != 0:
                raise SystemExit(f"{stage} failed")
        results["oversample-first"] = mean_kappas(base)
        for stage in ("train", "evaluate"):
            if main([stage, "--out", str(base), "--split-first", *common]) != 0:
                raise SystemExit(f"{stage} failed")
        results["split-first"] = mean_kappas(base)

    models = list(results["oversample-first"])
    print(f"{'model':<16}{'oversample-first':>18}{'split-first':>14}")
    for m in models:
        print(f"{m:<16}{results['oversample-first'][m]:>18.3f}{results['split-first'][m]:>14.3f}")
