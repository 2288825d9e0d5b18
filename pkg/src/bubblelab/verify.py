"""Quadrature checks of the model-energy expansions and related property probes.

Energies of sampled model maps are computed with the spectral quadrature
(:func:`~bubblelab.energy.spectral_energy_parts`) on two grids and combined by
second-order Richardson extrapolation in ``h``; the difference between the
extrapolated and the fine-grid value is reported as the quadrature error.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .energy import (
    ExpansionInputs,
    energy_parts,
    expansion_dA,
    expansion_dlambda,
    expansion_energy,
    second_variation,
    spectral_energy_parts,
)
from .greens import script_J_forms
from .models import BubbleParams, build_z, project_tangent, rho_field, tangent_basis, z_inner, z_norm
from .torus import Grid, TorusPoint, integrate

CENTER = TorusPoint(0.5, 0.5)


@dataclass(frozen=True)
class QuadratureEnergy:
    """Richardson-extrapolated ``(dirichlet, biharmonic)`` of a model map."""

    lam: float
    dirichlet: float
    biharmonic: float
    error: float
    grids: tuple

    def total(self, epsilon: float) -> float:
        return self.dirichlet + epsilon * self.biharmonic


def richardson(coarse: float, fine: float, order: int = 2) -> float:
    """Extrapolate two values on grids ``h`` and ``h/2`` with error ``O(h^order)``."""
    return fine + (fine - coarse) / (2**order - 1)


def model_energy_parts(params: BubbleParams, n: int, method: str = "spectral") -> tuple[float, float]:
    z = build_z(params, Grid(n)).u
    if method == "spectral":
        return spectral_energy_parts(z)
    if method == "stencil":
        return energy_parts(z)
    raise ValueError(f"unknown quadrature {method!r}")


def quadrature_energy(
    lam: float,
    a: TorusPoint = CENTER,
    grids: tuple = (1024, 2048),
    method: str = "spectral",
) -> QuadratureEnergy:
    n1, n2 = grids
    if n2 != 2 * n1:
        raise ValueError("Richardson extrapolation needs grids n and 2n")
    p = BubbleParams(a, lam)
    d1, b1 = model_energy_parts(p, n1, method)
    d2, b2 = model_energy_parts(p, n2, method)
    d, b = richardson(d1, d2), richardson(b1, b2)
    return QuadratureEnergy(lam, d, b, abs(d - d2) + abs(b - b2), (n1, n2))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    ci: float  # half-width of the 95% confidence interval
    intercept: float


def loglog_slope(x, y) -> SlopeFit:
    """Least-squares slope of ``log|y|`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float)))
    fit = stats.linregress(lx, ly)
    dof = len(lx) - 2
    ci = float(stats.t.ppf(0.975, dof) * fit.stderr) if dof > 0 else float("nan")
    return SlopeFit(float(fit.slope), ci, float(fit.intercept))


@dataclass
class ExpansionRow:
    lam: float
    epsilon: float
    quad_energy: float
    predicted_energy: float
    residual: float
    quad_error: float


@dataclass
class ExpansionReport:
    rows: list = field(default_factory=list)
    energy_remainder_slope: float = float("nan")
    energy_remainder_slope_ci: float = float("nan")
    remainder_at_smallest_lam: float = float("nan")
    eps_term_rel_errors: dict = field(default_factory=dict)
    dlambda: dict = field(default_factory=dict)
    dA: dict = field(default_factory=dict)

    def orders(self) -> dict:
        out = asdict(self)
        out.pop("rows")
        return out


def verify_expansions(
    lams=(8.0, 16.0, 32.0, 64.0),
    epsilon: float = 1e-5,
    grids: tuple = (1024, 2048),
    eps_term_lams=(16.0, 32.0),
    scriptJ: float | None = None,
) -> ExpansionReport:
    """Energy expansion with and without the epsilon term, plus its lambda and a derivatives."""
    J = script_J_forms() if scriptJ is None else scriptJ
    rep = ExpansionReport()
    remainders = []
    for lam in lams:
        q = quadrature_energy(lam, grids=grids)
        for eps in (0.0, epsilon):
            pred = expansion_energy(ExpansionInputs(J, lam, eps))
            rep.rows.append(ExpansionRow(lam, eps, q.total(eps), pred, q.total(eps) - pred, q.error))
        remainders.append(q.dirichlet - expansion_energy(ExpansionInputs(J, lam)))
        if lam in eps_term_lams:
            term = 32 * np.pi / 3 * epsilon * lam**2
            rep.eps_term_rel_errors[str(lam)] = abs(epsilon * q.biharmonic - term) / term
    fit = loglog_slope(lams, remainders)
    rep.energy_remainder_slope = fit.slope
    rep.energy_remainder_slope_ci = fit.ci
    rep.remainder_at_smallest_lam = float(abs(remainders[int(np.argmin(lams))]))
    rep.dlambda = dlambda_check(epsilon=epsilon, grids=grids, scriptJ=J)
    rep.dA = dA_check(epsilon=epsilon, grids=grids)
    return rep


def dlambda_check(lam=16.0, dlam=0.5, epsilon=1e-5, grids=(1024, 2048), scriptJ=None) -> dict:
    """Central difference in ``lam`` of quadrature energies against the two-term derivative."""
    J = script_J_forms() if scriptJ is None else scriptJ
    ep = quadrature_energy(lam + dlam, grids=grids).total(epsilon)
    em = quadrature_energy(lam - dlam, grids=grids).total(epsilon)
    fd = (ep - em) / (2 * dlam)
    pred = expansion_dlambda(ExpansionInputs(J, lam, epsilon))
    return {"lam": lam, "epsilon": epsilon, "fd": fd, "predicted": pred, "rel_error": abs(fd - pred) / abs(pred)}


def dA_check(lam=16.0, da=1e-3, epsilon=1e-5, grids=(1024, 2048), a=TorusPoint(0.3117, 0.6841)) -> dict:
    """Central differences of the energy in ``a``; the fitted ``C`` in ``|dE/da| <= C (1/lam^3 + eps lam)``.

    The default centre is off the grid and off its symmetry axes: at a grid node
    the two one-sided energies coincide by reflection and the difference is
    trivially zero.
    """
    grads = []
    for e in ((da, 0.0), (0.0, da)):
        ap = TorusPoint(a.x + e[0], a.y + e[1])
        am = TorusPoint(a.x - e[0], a.y - e[1])
        ep = quadrature_energy(lam, ap, grids).total(epsilon)
        em = quadrature_energy(lam, am, grids).total(epsilon)
        grads.append((ep - em) / (2 * da))
    scale = 1 / lam**3 + epsilon * lam
    g = float(np.max(np.abs(grads)))
    return {
        "lam": lam,
        "epsilon": epsilon,
        "fd": [float(v) for v in grads],
        "predicted": expansion_dA(0.0, lam),
        "fitted_C": g / scale,
    }


def random_smooth_field(grid: Grid, rng: np.random.Generator, max_mode: int = 3, terms: int = 4) -> np.ndarray:
    """Sum of a few random low Fourier modes with random vector amplitudes."""
    X, Y = grid.coords()
    out = np.zeros((grid.n, grid.n, 3))
    for _ in range(terms):
        k = rng.integers(-max_mode, max_mode + 1, 2)
        phase = rng.uniform(0, 2 * np.pi)
        out += rng.standard_normal(3) * np.cos(2 * np.pi * (k[0] * X + k[1] * Y) + phase)[..., None]
    return out


def _bubble_scale_field(grid, params, rng):
    x = grid.displacements(params.a)
    w = np.exp(-(params.lam**2) * np.sum(x * x, axis=-1) * rng.uniform(0.5, 4))
    poly = rng.standard_normal((3, 3))
    s = params.lam * x
    return w[..., None] * (poly[0] + poly[1] * s[..., :1] + poly[2] * s[..., 1:])


@dataclass
class RayleighProbe:
    minimum: float
    quotients: np.ndarray


def rayleigh_probe(
    lam: float = 8.0,
    epsilon: float = 1e-4,
    n: int = 128,
    samples: int = 100,
    seed: int = 0,
) -> RayleighProbe:
    """Second variation over z-norm of random tangent fields z-orthogonal to the model directions.

    Half of the samples are torus-scale Fourier fields, half are concentrated at
    the bubble scale.
    """
    rng = np.random.default_rng(seed)
    grid = Grid(n)
    p = BubbleParams(CENTER, lam)
    z = build_z(p, grid).u
    rho2 = rho_field(p, grid) ** 2
    # orthonormal basis of the model directions in the z inner product
    basis = []
    for T in tangent_basis(p, grid):
        for B in basis:
            T = T - z_inner(T, B, p, rho2) * B
        basis.append(T / z_norm(T, p, rho2))
    q = np.empty(samples)
    for k in range(samples):
        raw = random_smooth_field(grid, rng) if k % 2 == 0 else _bubble_scale_field(grid, p, rng)
        V = project_tangent(z, raw)
        # re-orthogonalise twice: the projection onto tangent planes does not commute with z-orthogonality
        for _ in range(2):
            for B in basis:
                V = project_tangent(z, V - z_inner(V, B, p, rho2) * B)
        q[k] = second_variation(z, epsilon, V, V, check=False) / z_inner(V, V, p, rho2)
    return RayleighProbe(float(q.min()), q)


def l1_constant(lams=(8.0, 16.0, 32.0), n: int = 256, samples: int = 20, seed: int = 0) -> dict:
    """Fitted ``K = max ||v||_1 / ((log lam)^(1/2) ||v||_z)`` per ``lam`` over random smooth ``v``."""
    rng = np.random.default_rng(seed)
    grid = Grid(n)
    fields = [random_smooth_field(grid, rng) for _ in range(samples)]
    K = {}
    for lam in lams:
        p = BubbleParams(CENTER, lam)
        rho2 = rho_field(p, grid) ** 2
        K[lam] = max(
            integrate(np.linalg.norm(v, axis=-1)) / (np.sqrt(np.log(lam)) * z_norm(v, p, rho2)) for v in fields
        )
    return K
