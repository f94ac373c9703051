"""Locate the region boundaries of the two-halves patch model and classify its fixed points.

Usage: python scripts/patch_model.py [--size 8] [--theta 0.1] [--out results/patch_model.csv]
"""

import argparse
from pathlib import Path

from loopybp import accuracy, exact, fixedpoints, model, stability
from loopybp.cli import write_results


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=8)
    parser.add_argument("--theta", type=float, default=0.1)
    parser.add_argument("--restarts", type=int, default=200)
    parser.add_argument("--out", default="results/patch_model.csv")
    args = parser.parse_args()

    n = args.size
    layout = model.halves_layout(n, n)
    family = lambda J: model.make_patch_model(n, n, layout, J, args.theta)  # noqa: E731
    j_a, j_c = accuracy.estimate_region_boundaries(family, layout, restarts=args.restarts)
    print(f"J_A = {j_a:.3f}, J_C = {j_c:.3f}")

    rows = []
    for J in (0.5 * j_a, 0.5 * (j_a + j_c), j_c + 0.2):
        m = family(J)
        ref = exact.transfer_matrix_grid(m, n, n)
        for k, fp in enumerate(fixedpoints.enumerate_bp_fixed_points(m, args.restarts)):
            rec = stability.stability_record(m, fp.nu)
            rows.append(
                {
                    "J": J,
                    "fixed_point": k,
                    "class": accuracy.classify_patch_fixed_point(m, fp.beliefs, layout).cls.value,
                    "stability": rec.cls.value,
                    "F_B": fp.free_energy,
                    "marginal_mse": accuracy.marginal_mse(fp, ref),
                }
            )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_results(rows, args.out)
    print(f"{len(rows)} rows -> {args.out}")


if __name__ == "__main__":
    main()
