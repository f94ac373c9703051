"""Run the scheduler-convergence experiment and write its CSV.

Usage: python scripts/scheduler_convergence.py [--config scripts/configs/scheduler_convergence.json] [--out results/scheduler_convergence.csv]
"""

import argparse
from pathlib import Path

from loopybp.cli import load_config, run_experiment

HERE = Path(__file__).resolve().parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=HERE / "configs" / "scheduler_convergence.json")
    parser.add_argument("--out", default="results/scheduler_convergence.csv")
    args = parser.parse_args()
    spec = load_config(args.config)
    spec.output = args.out
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(spec)
    print(f"{len(rows)} rows -> {args.out}")


if __name__ == "__main__":
    main()
