"""Quadrature check of the energy and lambda-derivative expansions of the bubble model.

Prints the remainder table, its log-log slope, the epsilon-term errors and the
lambda / a difference checks.

    python3 scripts/run_expansions.py --grids 1024 2048
"""
import argparse

from bubblelab.verify import dA_check, dlambda_check, verify_expansions


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lams", type=float, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--grids", type=int, nargs=2, default=[1024, 2048])
    ap.add_argument("--epsilon", type=float, default=1e-5)
    args = ap.parse_args()
    grids = tuple(args.grids)

    rep = verify_expansions(tuple(args.lams), args.epsilon, grids)
    print(f"{'lam':>6} {'eps':>8} {'quadrature':>16} {'expansion':>16} {'residual':>12} {'quad err':>10}")
    for r in rep.rows:
        print(
            f"{r.lam:6.0f} {r.epsilon:8.1e} {r.quad_energy:16.10f} {r.predicted_energy:16.10f} "
            f"{r.residual:12.4e} {r.quad_error:10.1e}"
        )
    print(f"remainder slope {rep.energy_remainder_slope:.3f} +/- {rep.energy_remainder_slope_ci:.3f}")
    print(f"remainder at smallest lam {rep.remainder_at_smallest_lam:+.4e}")
    for lam, err in rep.eps_term_rel_errors.items():
        print(f"eps-term relative error at lam={lam}: {err:.2e}")
    d = dlambda_check(epsilon=args.epsilon, grids=grids)
    print(f"dE/dlam at lam=16: fd {d['fd']:.6e} expansion {d['predicted']:.6e} rel err {d['rel_error']:.2e}")
    a = dA_check(epsilon=args.epsilon, grids=grids)
    print(f"dE/da at lam=16: {a['fd'][0]:.2e}, {a['fd'][1]:.2e}; fitted C {a['fitted_C']:.2e}")


if __name__ == "__main__":
    main()
