"""Continuation sweep in epsilon with a bubble fit per entry; prints the scaling table.

    python3 scripts/run_sweep.py --n 512 --eps 1e-4 5e-5 2.5e-5
"""
import argparse
import time

import numpy as np

from bubblelab.energy import predicted_lambda, solid_angle_degree
from bubblelab.fit import fit_bubble
from bubblelab.greens import script_J_forms
from bubblelab.minimize import MinimizeOptions, continuation_sweep
from bubblelab.models import BubbleParams, build_z
from bubblelab.torus import Grid, TorusPoint
from bubblelab.verify import loglog_slope

TARGET = 3 * np.pi / 4


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-4, 5e-5, 2.5e-5])
    ap.add_argument("--tol-rel", type=float, default=1e-6)
    args = ap.parse_args()

    lam0 = predicted_lambda(args.eps[0], script_J_forms())
    u0 = build_z(BubbleParams(TorusPoint(0.5, 0.5), lam0), Grid(args.n)).u
    t0 = time.perf_counter()

    lams = []

    def report(res):
        fit = fit_bubble(res.u)
        lam = fit.params.lam
        lams.append(lam)
        dev = (res.epsilon * lam**4 - TARGET) / TARGET
        print(
            f"eps={res.epsilon:.3e} iters={res.iterations:4d} lam_hat={lam:.6f} "
            f"eps*lam^4={res.epsilon * lam**4:.5f} rel dev={dev:+.4f} "
            f"degree={solid_angle_degree(res.u):.12f} z_dist={fit.z_distance:.3e} "
            f"({time.perf_counter() - t0:.0f}s)",
            flush=True,
        )

    continuation_sweep(args.eps, u0, MinimizeOptions(tol_rel=args.tol_rel), callback=report)
    if len(lams) > 1:
        fit = loglog_slope(args.eps, lams)
        print(f"slope of log lam_hat vs log eps: {fit.slope:.4f} +/- {fit.ci:.4f} (target -0.25)")


if __name__ == "__main__":
    main()
