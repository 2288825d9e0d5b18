"""Batch driver: ``greens``, ``verify``, ``sweep`` and ``fit`` subcommands.

Exit codes: 0 success, 1 configuration or input error, 2 Green's function
failure, 3 expansion-order failure, 4 minimiser failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .config import ConfigError, LabConfig, load_config
from .energy import energy, predicted_lambda, solid_angle_degree
from .fit import fit_bubble
from .greens import EwaldConvergenceError, GreensEvaluator, check_pde_residual, regular_part_jet, script_J_forms
from .minimize import SweepError, continuation_sweep
from .models import BubbleParams, build_z
from .snapshot import SnapshotError, read_snapshot, write_snapshot
from .torus import Grid, TorusPoint, grad
from .verify import l1_constant, loglog_slope, rayleigh_probe, verify_expansions

log = logging.getLogger("bubblelab")

EXIT_OK, EXIT_CONFIG, EXIT_GREENS, EXIT_ORDERS, EXIT_MINIMIZER = 0, 1, 2, 3, 4
TARGET = 3 * math.pi / 4


@dataclass
class SweepRow:
    epsilon: float
    lambda_hat: float
    a_x: float
    a_y: float
    det_R: float
    energy_total: float
    energy_dirichlet: float
    residual: float
    eps_lambda4: float
    z_distance: float
    iterations: int


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


class CsvWriter:
    """CSV with a fixed header and full-precision numbers, flushed after every row."""

    def __init__(self, path: Path, columns):
        self.columns = list(columns)
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(self.columns)
        self._fh.flush()

    def write(self, row: dict):
        self._w.writerow([_fmt(row[c]) for c in self.columns])
        self._fh.flush()

    def close(self):
        self._fh.close()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(float(obj)) else float(obj)
    return obj


def write_json(path: Path, data: dict):
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n")


# --------------------------------------------------------------------- greens


def cmd_greens(cfg: LabConfig, out: Path) -> int:
    gc = cfg.greens
    ev = GreensEvaluator(gc.ewald_split, gc.real_space_cutoff, gc.fourier_cutoff)
    try:
        ev.check_convergence()
        jet = regular_part_jet(ev)
        J_greens = jet.scriptJ
        if jet.error_estimate > 1e-3 * abs(J_greens):
            raise ArithmeticError(f"differencing error {jet.error_estimate:.2e} too large")
    except (EwaldConvergenceError, ArithmeticError) as exc:
        print(f"greens: {exc}", file=sys.stderr)
        return EXIT_GREENS
    radii = np.geomspace(gc.r_min, gc.r_max, gc.n_radii)
    theta = 2 * np.pi * np.arange(gc.n_angles) / gc.n_angles
    R, T = np.meshgrid(radii, theta, indexing="ij")
    x = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    g = ev.g(x)
    gJ = ev.gradJ_y(x)
    w = CsvWriter(out / "greens.csv", ["x", "y", "g", "gradJ1", "gradJ2"])
    for k in range(x.shape[0]):
        w.write({"x": x[k, 0], "y": x[k, 1], "g": g[k], "gradJ1": gJ[k, 0], "gradJ2": gJ[k, 1]})
    w.close()
    J_forms = script_J_forms()
    grid = Grid(gc.pde_grid)
    summary = {
        "scriptJ_forms": J_forms,
        "scriptJ_greens": J_greens,
        "scriptJ_rel_diff": abs(J_greens - J_forms) / abs(J_forms),
        "mixed_hessian": jet.mixed_hess,
        "mixed_hessian_error": jet.error_estimate,
        "pde_residual": {
            "grid_n": gc.pde_grid,
            "max_outside_3h": check_pde_residual(grid, ev),
            "annulus": list(gc.pde_annulus),
            "max_on_annulus": check_pde_residual(grid, ev, annulus=tuple(gc.pde_annulus)),
        },
        "ewald": {"split": gc.ewald_split, "real_shells": gc.real_space_cutoff, "fourier_shells": gc.fourier_cutoff},
    }
    write_json(out / "jsummary.json", summary)
    print(f"greens: scriptJ_forms={J_forms:.9g} scriptJ_greens={J_greens:.9g}", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------- verify


def cmd_verify(cfg: LabConfig, out: Path) -> int:
    vc = cfg.verify
    rep = verify_expansions(vc.lams, vc.epsilon, tuple(vc.grids))
    w = CsvWriter(out / "expansions.csv", [f.name for f in fields(rep.rows[0])])
    for row in rep.rows:
        w.write(asdict(row))
    w.close()
    orders = rep.orders()
    checks = {
        "energy_remainder_slope": orders["energy_remainder_slope"] <= vc.slope_floor,
        "remainder_at_smallest_lam": orders["remainder_at_smallest_lam"] <= 0.05,
        "eps_term": all(v <= 0.05 for v in orders["eps_term_rel_errors"].values()),
        "dlambda": orders["dlambda"]["rel_error"] <= 0.10,
        "dA": orders["dA"]["fitted_C"] <= 50,
    }
    orders["slope_floor"] = vc.slope_floor
    orders["checks"] = checks
    if vc.probes:
        probe = rayleigh_probe(seed=cfg.seed)
        K = l1_constant(seed=cfg.seed)
        orders["probes"] = {
            "rayleigh_min": probe.minimum,
            "rayleigh_quantiles": np.quantile(probe.quotients, [0, 0.25, 0.5, 0.75, 1]),
            "l1_K": {str(k): v for k, v in K.items()},
            "l1_K_ratio": K[max(K)] / K[min(K)],
        }
    write_json(out / "orders.json", orders)
    for name, ok in checks.items():
        print(f"verify: {name}: {'ok' if ok else 'VIOLATED'}", file=sys.stderr)
    return EXIT_OK if checks["energy_remainder_slope"] else EXIT_ORDERS


# ---------------------------------------------------------------------- sweep


def _seed_scale(cfg: LabConfig, eps: float) -> float:
    lam = cfg.bubble.lam
    if lam == "predicted":
        return predicted_lambda(eps, script_J_forms())
    if lam == "cold":
        return 2 * predicted_lambda(eps, script_J_forms())
    return float(lam)


def _seed_field(cfg: LabConfig, eps: float) -> np.ndarray:
    p = BubbleParams(TorusPoint(*cfg.bubble.a), _seed_scale(cfg, eps))
    return build_z(p, Grid(cfg.grid_n)).u


def cmd_sweep(cfg: LabConfig, out: Path) -> int:
    opts = cfg.minimize_options()
    w = CsvWriter(out / "sweep.csv", [f.name for f in fields(SweepRow)])
    rows, degrees, grad_ratio = [], [], []
    index = {e: k for k, e in enumerate(cfg.epsilon_list)}

    def record(res):
        fr = fit_bubble(res.u, xatol=cfg.fit.xatol, restarts=cfg.fit.restarts)
        p = fr.params
        e = energy(res.u, res.epsilon)
        row = SweepRow(
            epsilon=res.epsilon,
            lambda_hat=p.lam,
            a_x=p.a.x,
            a_y=p.a.y,
            det_R=float(np.linalg.det(p.R)),
            energy_total=e.total,
            energy_dirichlet=e.dirichlet,
            residual=res.final_residual,
            eps_lambda4=res.epsilon * p.lam**4,
            z_distance=fr.z_distance,
            iterations=res.iterations,
        )
        w.write(asdict(row))
        rows.append(row)
        degrees.append(solid_angle_degree(res.u))
        grad_ratio.append(float(np.sqrt(np.max(np.sum(grad(res.u) ** 2, axis=(-2, -1))))) / p.lam)
        if cfg.snapshots:
            k = index[res.epsilon]
            write_snapshot(
                res.u,
                out / "snapshots" / f"eps_{k:02d}",
                extra={"epsilon": res.epsilon, "iterations": res.iterations, "converged": res.converged},
            )
        print(
            f"sweep: eps={res.epsilon:g} lam_hat={p.lam:.6g} eps*lam^4={row.eps_lambda4:.6g} "
            f"z_distance={fr.z_distance:.3g}",
            file=sys.stderr,
        )

    seed = _seed_field(cfg, cfg.epsilon_list[0]) if cfg.warm_start else (lambda e: _seed_field(cfg, e))
    status = EXIT_OK
    try:
        continuation_sweep(cfg.epsilon_list, seed, opts, warm_start=cfg.warm_start, callback=record)
    except SweepError as exc:
        print(f"sweep: {exc}", file=sys.stderr)
        status = EXIT_MINIMIZER
    finally:
        w.close()
    eps = [r.epsilon for r in rows]
    lams = [r.lambda_hat for r in rows]
    fit = loglog_slope(eps, lams) if len(rows) >= 2 else None
    e4 = [r.eps_lambda4 for r in rows]
    scaling = {
        "slope": fit.slope if fit else float("nan"),
        "slope_ci": fit.ci if fit else float("nan"),
        "mean_eps_lambda4": float(np.mean(e4)) if e4 else float("nan"),
        "target": TARGET,
        "rel_deviation": [(v - TARGET) / TARGET for v in e4],
        "degrees": degrees,
        "gradient_bound_C": max(grad_ratio) if grad_ratio else float("nan"),
        "complete": status == EXIT_OK,
    }
    write_json(out / "scaling.json", scaling)
    return status


# ------------------------------------------------------------------------ fit


def cmd_fit(cfg: LabConfig, out: Path) -> int:
    if not cfg.fit.input:
        raise ConfigError("fit needs an input snapshot directory (fit.input or --input)")
    u, meta = read_snapshot(cfg.fit.input)
    fr = fit_bubble(u, xatol=cfg.fit.xatol, restarts=cfg.fit.restarts)
    p = fr.params
    result = {
        "a": [p.a.x, p.a.y],
        "lambda_hat": p.lam,
        "R": p.R,
        "det_R": float(np.linalg.det(p.R)),
        "z_distance": fr.z_distance,
        "coarse": {"a": [fr.coarse.a.x, fr.coarse.a.y], "lambda": fr.coarse.lam, "z_distance": fr.coarse_distance},
        "evaluations": fr.evaluations,
        "degree": solid_angle_degree(u),
    }
    eps = meta.get("extra", {}).get("epsilon")
    if eps is not None:
        result["epsilon"] = eps
        result["eps_lambda4"] = eps * p.lam**4
    write_json(out / "fit.json", result)
    print(f"fit: a=({p.a.x:.6f}, {p.a.y:.6f}) lam={p.lam:.6g} z_distance={fr.z_distance:.3g}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"greens": cmd_greens, "verify": cmd_verify, "sweep": cmd_sweep, "fit": cmd_fit}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bubblelab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--out", help="output directory (overrides out_dir)")
    ap.add_argument("--grid", type=int, help="grid size (overrides grid_n)")
    ap.add_argument("--seed", type=int, help="random seed (overrides seed)")
    ap.add_argument("--input", help="snapshot directory for the fit command (overrides fit.input)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    overrides = {"out_dir": args.out, "grid_n": args.grid, "seed": args.seed}
    if args.input:
        overrides["fit"] = {"input": args.input}
    try:
        cfg = load_config(args.config, overrides)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / f"config.{args.command}.json", cfg.to_dict())
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
