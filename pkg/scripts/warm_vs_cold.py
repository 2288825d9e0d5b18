"""Iteration counts of warm-started versus cold-started minimisation along a sweep.

Both runs stop at the same absolute residual so the counts are comparable.

    python3 scripts/warm_vs_cold.py --n 128 256
"""
import argparse

from bubblelab.energy import predicted_lambda
from bubblelab.greens import script_J_forms
from bubblelab.minimize import MinimizeOptions, continuation_sweep
from bubblelab.models import BubbleParams, build_z
from bubblelab.torus import Grid, TorusPoint


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[128, 256])
    ap.add_argument("--eps", type=float, nargs="+", default=[4e-4, 2e-4, 1e-4])
    ap.add_argument("--tol", type=float, default=1e-5, help="absolute L2 residual")
    args = ap.parse_args()
    J = script_J_forms()
    opts = MinimizeOptions(tol=args.tol)
    for n in args.n:
        grid = Grid(n)

        def seed(eps, grid=grid):
            return build_z(BubbleParams(TorusPoint(0.5, 0.5), predicted_lambda(eps, J)), grid).u

        warm = continuation_sweep(args.eps, seed(args.eps[0]), opts, warm_start=True)
        cold = continuation_sweep(args.eps, seed, opts, warm_start=False)
        # the first entry starts identically in both runs; compare the rest
        w = sum(r.iterations for r in warm[1:])
        c = sum(r.iterations for r in cold[1:])
        print(f"n={n}: warm {[r.iterations for r in warm]} cold {[r.iterations for r in cold]} "
              f"(after first entry: warm {w}, cold {c})")


if __name__ == "__main__":
    main()
