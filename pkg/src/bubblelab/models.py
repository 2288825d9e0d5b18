"""Approximate bubbles on the torus: stereographic profiles glued to a Green's-function tail.

A model map is determined by a bubble point ``a``, a scale ``lam >= 1`` and an
orthogonal matrix ``R``.  Near ``a`` it is ``R`` applied to the stereographic
bubble plus a harmonic correction built from the regular part of the Green's
function; away from ``a`` it is a small Green's-gradient perturbation of the
south pole.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .greens import DEFAULT, GreensEvaluator, gradJ_table
from .torus import IOTA, R_CUT, Grid, TorusPoint, geodesic_distance, grad, integrate


class ResolutionWarning(UserWarning):
    pass


class DegenerateModelError(ValueError):
    pass


@dataclass(frozen=True)
class BubbleParams:
    a: TorusPoint
    lam: float
    R: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if not isinstance(self.a, TorusPoint):
            object.__setattr__(self, "a", TorusPoint(*self.a))
        if self.lam < 1:
            raise ValueError(f"bubble scale must be >= 1, got {self.lam}")
        R = np.asarray(self.R, dtype=float)
        if R.shape != (3, 3) or np.max(np.abs(R.T @ R - np.eye(3))) > 1e-12:
            raise ValueError("R must be a 3x3 orthogonal matrix")
        object.__setattr__(self, "R", R)

    def replace(self, **kw) -> "BubbleParams":
        d = dict(a=self.a, lam=self.lam, R=self.R)
        d.update(kw)
        return BubbleParams(**d)


@dataclass(frozen=True)
class CutoffProfile:
    """Radial quintic smoothstep: 1 on ``|x| <= r``, 0 on ``|x| >= 2r``, C^2 at both ends."""

    r: float = R_CUT

    def __call__(self, radius):
        s = np.clip((np.asarray(radius, dtype=float) - self.r) / self.r, 0.0, 1.0)
        return 1.0 - s**3 * (10 - 15 * s + 6 * s**2)


@dataclass
class ModelField:
    u: np.ndarray
    params: BubbleParams
    grid: Grid
    meta: dict = field(default_factory=dict)


def stereo(lam: float, x) -> np.ndarray:
    """Stereographic bubble ``pi_lam(x)`` with north pole at the origin."""
    x = np.asarray(x, dtype=float)
    lx = lam * x
    q = np.sum(lx * lx, axis=-1)
    d = 1 + q
    return np.concatenate([2 * lx / d[..., None], ((1 - q) / d)[..., None]], axis=-1)


@dataclass
class StereoJet:
    value: np.ndarray  # (..., 3)
    gradient: np.ndarray  # (..., 3, 2): gradient[..., c, i] = d_i pi^c
    laplacian: np.ndarray  # (..., 3)
    dlam: np.ndarray  # (..., 3)


def stereo_jet(lam: float, x) -> StereoJet:
    """Closed-form value, gradient, Laplacian and scale derivative of ``pi_lam``."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    l2 = lam * lam
    d = 1 + l2 * (x1 * x1 + x2 * x2)
    val = stereo(lam, x)
    pref = 2 * lam / d**2
    g = np.empty(x.shape[:-1] + (3, 2))
    g[..., 0, 0] = 1 - l2 * x1 * x1 + l2 * x2 * x2
    g[..., 1, 0] = -2 * l2 * x1 * x2
    g[..., 2, 0] = -2 * lam * x1
    g[..., 0, 1] = -2 * l2 * x1 * x2
    g[..., 1, 1] = 1 + l2 * x1 * x1 - l2 * x2 * x2
    g[..., 2, 1] = -2 * lam * x2
    g *= pref[..., None, None]
    lap = (-8 * l2 / d**2)[..., None] * val
    dlam = np.einsum("...ci,...i->...c", g, x) / lam
    return StereoJet(val, g, lap, dlam)


def _chart(grid: Grid, a: TorusPoint):
    x = grid.displacements(a)
    return x, np.hypot(x[..., 0], x[..., 1])


def build_z_tilde(
    params: BubbleParams,
    grid: Grid,
    cutoff: CutoffProfile = CutoffProfile(),
    evaluator: GreensEvaluator | None = None,
) -> np.ndarray:
    """Un-normalised, un-rotated glued model at every node.

    ``evaluator=None`` uses the tabulated regular part (fast); pass an
    evaluator to use direct Ewald sums.
    """
    lam = params.lam
    x, r = _chart(grid, params.a)
    gradJ = gradJ_table(DEFAULT) if evaluator is None else evaluator.gradJ_y
    gJ = gradJ(x)
    gJ0 = gradJ(np.zeros(2))
    phi = cutoff(r)

    zt = np.zeros(x.shape[:-1] + (3,))
    inner = phi > 0
    zt[inner] = phi[inner, None] * stereo(lam, x[inner])
    zt[inner, :2] += phi[inner, None] * (2 / lam) * (gJ[inner] - gJ0)

    outer = phi < 1
    xo = x[outer]
    # grad_y G(x, 0) = x/|x|^2 + grad_y J(x, 0)
    gradG = xo / np.sum(xo * xo, axis=-1)[:, None] + gJ[outer]
    w = (1 - phi[outer])[:, None]
    zt[outer, :2] += w * (2 / lam) * (gradG - gJ0)
    zt[outer, 2] += -w[:, 0]
    return zt


def build_z(
    params: BubbleParams,
    grid: Grid,
    cutoff: CutoffProfile = CutoffProfile(),
    evaluator: GreensEvaluator | None = None,
) -> ModelField:
    """Sample the model map ``R * zt/|zt|`` on ``grid``."""
    if params.lam * grid.h > 0.25:
        warnings.warn(
            f"bubble under-resolved: lam*h = {params.lam * grid.h:.3f} > 0.25", ResolutionWarning, stacklevel=2
        )
    zt = build_z_tilde(params, grid, cutoff, evaluator)
    norm = np.linalg.norm(zt, axis=-1)
    if np.min(norm) < 0.5:
        raise DegenerateModelError(f"|z~| = {np.min(norm):.3f} < 1/2 before normalisation")
    z = zt / norm[..., None]
    z = z @ params.R.T
    return ModelField(u=z, params=params, grid=grid, meta={"min_norm_before_projection": float(np.min(norm))})


def rho_z(params: BubbleParams, p: TorusPoint) -> float:
    lam = params.lam
    d = min(geodesic_distance(p, params.a), IOTA)
    return lam / (1 + lam * lam * d * d)


def rho_field(params: BubbleParams, grid: Grid) -> np.ndarray:
    _, r = _chart(grid, params.a)
    lam = params.lam
    d = np.minimum(r, IOTA)
    return lam / (1 + lam * lam * d * d)


def z_inner(V: np.ndarray, W: np.ndarray, params: BubbleParams, rho2: np.ndarray | None = None) -> float:
    """``<V, W>_z = int grad V . grad W + rho_z^2 V . W`` on the grid of ``V``."""
    if V.shape != W.shape:
        raise ValueError("fields live on different grids")
    if rho2 is None:
        rho2 = rho_field(params, Grid(V.shape[0])) ** 2
    gv, gw = grad(V), grad(W)
    dens = np.sum(gv * gw, axis=(-2, -1)) + rho2 * np.sum(V * W, axis=-1)
    return integrate(dens)


def z_norm(V: np.ndarray, params: BubbleParams, rho2: np.ndarray | None = None) -> float:
    return float(np.sqrt(max(z_inner(V, V, params, rho2), 0.0)))


def project_tangent(u: np.ndarray, V: np.ndarray) -> np.ndarray:
    return V - np.sum(u * V, axis=-1, keepdims=True) * u


TANGENT_NAMES = ("d_lambda", "d_a1", "d_a2", "rot_e1", "rot_e2", "rot_e3")


def tangent_basis(params: BubbleParams, grid: Grid, rel_dlam: float = 1e-3, da: float = 1e-4) -> list[np.ndarray]:
    """The six model directions: scale, the two translations and the three rotations.

    Scale and translation derivatives are central differences in the parameter,
    projected onto the tangent planes of ``z``; rotations are ``omega x z``.
    """
    if params.lam < 2:
        raise ValueError("tangent_basis needs lam >= 2")
    z = build_z(params, grid).u
    lam = params.lam
    dl = rel_dlam * lam
    zp = build_z(params.replace(lam=lam + dl), grid).u
    zm = build_z(params.replace(lam=lam - dl), grid).u
    fields = [project_tangent(z, (zp - zm) / (2 * dl))]
    for e in ((da, 0.0), (0.0, da)):
        ap = TorusPoint(params.a.x + e[0], params.a.y + e[1])
        am = TorusPoint(params.a.x - e[0], params.a.y - e[1])
        dz = (build_z(params.replace(a=ap), grid).u - build_z(params.replace(a=am), grid).u) / (2 * da)
        fields.append(project_tangent(z, dz))
    for k in range(3):
        w = np.zeros(3)
        w[k] = 1.0
        fields.append(np.cross(w, z))
    return fields
