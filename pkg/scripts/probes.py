"""Property probes at the bubble model: Hessian Rayleigh quotients and the L1/z-norm constant.

    python3 scripts/probes.py
"""
import argparse

import numpy as np

from bubblelab.verify import l1_constant, rayleigh_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=100)
    args = ap.parse_args()
    probe = rayleigh_probe(samples=args.samples, seed=args.seed)
    q = probe.quotients
    print(f"Rayleigh quotients over {len(q)} z-orthogonal fields: min {q.min():.4f} "
          f"median {np.median(q):.4f} max {q.max():.4f}")
    K = l1_constant(seed=args.seed)
    for lam, k in K.items():
        print(f"K(lam={lam:g}) = {k:.4f}")
    lams = sorted(K)
    print(f"ratio K({lams[-1]:g}) / K({lams[0]:g}) = {K[lams[-1]] / K[lams[0]]:.3f}")


if __name__ == "__main__":
    main()
