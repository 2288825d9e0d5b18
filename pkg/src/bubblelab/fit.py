"""Recover bubble parameters ``(a, lam, R)`` from a sampled sphere-valued map."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as sp_minimize

from .energy import solid_angle_degree
from .models import BubbleParams, build_z_tilde, rho_field, stereo
from .torus import Grid, TorusPoint, grad, integrate

log = logging.getLogger(__name__)


class FlatFieldError(ValueError):
    pass


class DegenerateCovarianceError(ValueError):
    pass


class BasinEscapeError(RuntimeError):
    pass


@dataclass
class FitResult:
    params: BubbleParams
    z_distance: float
    coarse: BubbleParams
    coarse_distance: float
    stage_trace: list = field(default_factory=list)
    evaluations: int = 0


def _peak_offset(fm, f0, fp):
    den = fm - 2 * f0 + fp
    if den >= 0:
        return 0.0, f0
    t = 0.5 * (fm - fp) / den
    t = float(np.clip(t, -0.5, 0.5))
    return t, f0 - 0.25 * (fm - fp) * t


def _grad_density(u):
    return np.sqrt(np.sum(grad(u) ** 2, axis=(-2, -1)))


def _peak(u):
    dens = _grad_density(u)
    n = u.shape[0]
    i, j = np.unravel_index(np.argmax(dens), dens.shape)
    tx, vx = _peak_offset(dens[(i - 1) % n, j], dens[i, j], dens[(i + 1) % n, j])
    ty, vy = _peak_offset(dens[i, (j - 1) % n], dens[i, j], dens[i, (j + 1) % n])
    # separable parabolic model of the peak
    peak = vx + vy - dens[i, j]
    return (i + tx) / n, (j + ty) / n, float(peak), float(dens[i, j])


def locate(u: np.ndarray) -> TorusPoint:
    """Grid node of maximal gradient density, refined by parabolic interpolation."""
    x, y, _, raw = _peak(u)
    if raw < 1:
        raise FlatFieldError("no bubble: max |grad u| < 1")
    return TorusPoint(x, y)


def scale_estimate(u: np.ndarray, a: TorusPoint | None = None) -> float:
    """Invert ``|grad pi_lam(0)| = 2 sqrt(2) lam`` at the interpolated peak."""
    _, _, peak, _ = _peak(u)
    return peak / (2 * np.sqrt(2))


def _polar(H, det_sign: int = 0):
    """Orthogonal factor of ``H``; with ``det_sign = +-1`` the best rotation of that determinant."""
    U, s, Vt = np.linalg.svd(H)
    if s[-1] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateCovarianceError(f"cross-covariance is rank deficient (singular values {s})")
    if det_sign:
        D = np.diag([1.0, 1.0, det_sign * np.sign(np.linalg.det(U @ Vt))])
        return U @ D @ Vt
    return U @ Vt


def fit_rotation(u: np.ndarray, a: TorusPoint, lam: float, det_sign: int = 0) -> np.ndarray:
    """Orthogonal ``R`` minimising ``sum |u - R pi_lam(x - a)|^2`` over ``|x - a| <= 2/lam``.

    ``det_sign`` restricts the search to rotations (+1) or reflections (-1).
    """
    grid = Grid(u.shape[0])
    x = grid.displacements(a)
    r = np.hypot(x[..., 0], x[..., 1])
    sel = r <= 2 / lam
    if sel.sum() < 3:
        raise DegenerateCovarianceError("too few samples inside the bubble core")
    P = stereo(lam, x[sel])
    H = u[sel].T @ P
    return _polar(H, det_sign)


def _flat(g):
    # (n, n, 3, 2) -> (3, 2 n^2)
    return np.moveaxis(g, 2, 0).reshape(3, -1)


class _ZObjective:
    """Squared z-distance of ``u`` to the model family with ``R`` eliminated in closed form."""

    def __init__(self, u, det_sign: int = 0):
        self.u = u
        self.det_sign = det_sign
        self.grid = Grid(u.shape[0])
        self.gu = grad(u)
        self.calls = 0

    def evaluate(self, a: TorusPoint, lam: float):
        self.calls += 1
        p = BubbleParams(a, lam)
        zt = build_z_tilde(p, self.grid)
        z = zt / np.linalg.norm(zt, axis=-1, keepdims=True)
        rho2 = rho_field(p, self.grid) ** 2
        gz = grad(z)
        n2 = self.grid.n ** 2
        # <u, R z>_z = tr(R^T H), maximised by the polar factor of H
        H = (_flat(self.gu) @ _flat(gz).T + (self.u * rho2[..., None]).reshape(-1, 3).T @ z.reshape(-1, 3)) / n2
        R = _polar(H, self.det_sign)
        diff = self.u - z @ R.T
        gd = grad(diff)
        d2 = integrate(np.sum(gd * gd, axis=(-2, -1))) + integrate(rho2 * np.sum(diff * diff, axis=-1))
        return max(d2, 0.0), R


def z_distance(u: np.ndarray, params: BubbleParams) -> float:
    """``||u - z(params)||_z`` with the rotation of ``params`` as given."""
    from .models import build_z, z_norm

    z = build_z(params, Grid(u.shape[0])).u
    return z_norm(u - z, params)


def coarse_fit(u: np.ndarray) -> BubbleParams:
    """Peak location, peak-gradient scale and Procrustes rotation of the orientation given by the degree."""
    a = locate(u)
    lam = max(scale_estimate(u, a), 1.0)
    R = fit_rotation(u, a, lam, orientation(u))
    return BubbleParams(a, lam, R)


def refine(
    u: np.ndarray,
    coarse: BubbleParams,
    xatol: float = 1e-4,
    fatol: float | None = None,
    max_evals: int = 2000,
    restarts: int = 0,
) -> FitResult:
    """Nelder-Mead over ``(a1, a2, log lam)`` of the z-distance, ``R`` fitted exactly at each probe.

    ``xatol`` bounds the final simplex diameter in every coordinate.
    """
    obj = _ZObjective(u, int(round(np.linalg.det(coarse.R))))
    lam0 = coarse.lam
    trace = []
    coarse_d2, _ = obj.evaluate(coarse.a, lam0)

    def f(theta):
        lam = float(np.exp(theta[2]))
        if not lam0 / 4 <= lam <= 4 * lam0:
            raise BasinEscapeError(f"scale left [{lam0 / 4:.3g}, {4 * lam0:.3g}]: {lam:.3g}")
        d2, _ = obj.evaluate(TorusPoint(theta[0], theta[1]), lam)
        trace.append((float(theta[0]) % 1, float(theta[1]) % 1, lam, d2))
        return d2

    # unwrap the start so the simplex does not straddle the seam
    x0 = np.array([coarse.a.x, coarse.a.y, np.log(lam0)])
    step = 0.25 / lam0
    simplex = np.array([x0, x0 + [step, 0, 0], x0 + [0, step, 0], x0 + [0, 0, 0.05]])
    if fatol is None:
        fatol = np.inf  # stop on simplex size alone
    results = []
    for k in range(restarts + 1):
        res = sp_minimize(
            f,
            x0,
            method="Nelder-Mead",
            options=dict(initial_simplex=simplex, xatol=xatol, fatol=fatol, maxfev=max_evals),
        )
        results.append(res)
        x0 = res.x
        s = 0.25 * step
        simplex = np.array([x0, x0 + [s, 0, 0], x0 + [0, s, 0], x0 + [0, 0, 0.0125]])
    best = min(results, key=lambda r: r.fun)
    if len(results) > 1:
        lams = np.exp([r.x[2] for r in results])
        if np.ptp(lams) / np.mean(lams) > 0.01:
            log.warning("Nelder-Mead restarts disagree: lam in %s", lams)
    a = TorusPoint(best.x[0], best.x[1])
    lam = float(np.exp(best.x[2]))
    d2, R = obj.evaluate(a, lam)
    params = BubbleParams(a, lam, R)
    return FitResult(
        params=params,
        z_distance=float(np.sqrt(d2)),
        coarse=coarse,
        coarse_distance=float(np.sqrt(coarse_d2)),
        stage_trace=trace,
        evaluations=obj.calls,
    )


def fit_bubble(u: np.ndarray, **kw) -> FitResult:
    """Coarse closed-form estimate followed by z-norm refinement."""
    return refine(u, coarse_fit(u), **kw)


def orientation(u: np.ndarray) -> int:
    """Sign of the degree: +1 for orientation preserving bubbles, -1 for reflections."""
    return int(np.sign(round(solid_angle_degree(u))))
