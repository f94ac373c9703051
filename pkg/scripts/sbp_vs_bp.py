"""Run the sbp-vs-bp experiment and write its CSV.

Usage: python scripts/sbp_vs_bp.py [--config scripts/configs/sbp_vs_bp.json] [--out results/sbp_vs_bp.csv]
"""

import argparse
from pathlib import Path

from loopybp.cli import load_config, run_experiment

HERE = Path(__file__).resolve().parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=HERE / "configs" / "sbp_vs_bp.json")
    parser.add_argument("--out", default="results/sbp_vs_bp.csv")
    args = parser.parse_args()
    spec = load_config(args.config)
    spec.output = args.out
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(spec)
    print(f"{len(rows)} rows -> {args.out}")


if __name__ == "__main__":
    main()
