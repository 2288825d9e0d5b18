"""Sphere-constrained descent for the discrete epsilon-energy."""
from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field

import numpy as np

from .energy import energy_parts, el_residual, solid_angle_degree
from .torus import grad, integrate, laplacian_symbol, wide_laplacian_symbol

MAX_RESOLUTION = 0.25

log = logging.getLogger(__name__)


class DegenerateRetractionError(ValueError):
    pass


class DegreeChangeError(RuntimeError):
    pass


class ResolutionGuardError(RuntimeError):
    pass


class SweepError(RuntimeError):
    """A sweep entry failed; ``results`` holds the entries completed before it."""

    def __init__(self, epsilon, cause, results=()):
        super().__init__(f"minimisation failed at eps={epsilon:g}: {cause}")
        self.epsilon = epsilon
        self.cause = cause
        self.results = list(results)


@dataclass
class MinimizeOptions:
    max_iters: int = 200_000
    tol: float | None = None  # absolute L2 residual; None -> tol_rel * initial residual
    tol_rel: float = 1e-6
    armijo: float = 1e-4
    backtrack: float = 0.5
    precondition: bool = True
    precond_shift: float = 1.0
    log_every: int = 0
    degree_every: int = 100
    progress_stream: object = None

    def __post_init__(self):
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")


@dataclass
class MinimizeResult:
    u: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    energy_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    degree_in: int = 0
    degree_out: int = 0
    epsilon: float = 0.0
    message: str = ""


def retract(u: np.ndarray, d: np.ndarray, tau: float) -> np.ndarray:
    """Nodewise normalisation ``(u + tau d) / |u + tau d|``."""
    v = u + tau * d
    nrm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.min(nrm) < 0.5:
        raise DegenerateRetractionError("|u + tau d| < 1/2: step too large")
    return v / nrm


def _l2(f):
    return float(np.sqrt(integrate(f * f)))


class _Preconditioner:
    """FFT inverse of ``shift - D^T D + eps L^2`` applied per component."""

    def __init__(self, n, epsilon, shift):
        lap = laplacian_symbol(n)
        self.symbol = shift - wide_laplacian_symbol(n) + epsilon * lap * lap

    def solve(self, f):
        F = np.fft.fft2(f, axes=(0, 1))
        return np.real(np.fft.ifft2(F / self.symbol[..., None], axes=(0, 1)))

    def apply(self, f):
        F = np.fft.fft2(f, axes=(0, 1))
        return np.real(np.fft.ifft2(F * self.symbol[..., None], axes=(0, 1)))


def resolution(u: np.ndarray) -> float:
    """``lam_hat h`` with ``lam_hat = max |grad u| / (2 sqrt 2)``, the bubble-scale estimate."""
    n = u.shape[0]
    peak = float(np.sqrt(np.max(np.sum(grad(u) ** 2, axis=(-2, -1)))))
    return peak / (2 * np.sqrt(2)) / n


def check_resolution(u: np.ndarray, limit: float = MAX_RESOLUTION) -> float:
    r = resolution(u)
    if r > limit:
        raise ResolutionGuardError(f"bubble under-resolved: lam_hat h = {r:.3f} > {limit}")
    return r


def _total(u, epsilon):
    d, b = energy_parts(u)
    return d + epsilon * b


def minimize(u0: np.ndarray, epsilon: float, opts: MinimizeOptions | None = None) -> MinimizeResult:
    """Projected (optionally preconditioned) gradient descent with BB steps and Armijo backtracking."""
    opts = opts or MinimizeOptions()
    u = np.array(u0, dtype=float, copy=True)
    n = u.shape[0]
    check_resolution(u)
    stream = opts.progress_stream if opts.progress_stream is not None else sys.stderr
    pre = _Preconditioner(n, epsilon, opts.precond_shift) if opts.precondition else None

    deg_in = int(round(solid_angle_degree(u)))
    E = _total(u, epsilon)
    r = el_residual(u, epsilon)
    res = _l2(r)
    tol = opts.tol if opts.tol is not None else opts.tol_rel * res
    energies, residuals = [E], [res]
    if res == 0.0 or res <= tol:
        return MinimizeResult(u, 0, res, True, energies, residuals, deg_in, deg_in, epsilon, "initial point critical")

    def direction(r):
        if pre is None:
            return -r
        d = -pre.solve(r)
        return d - np.sum(d * u, axis=-1, keepdims=True) * u

    tau = 1.0 if pre is not None else 1.0 / (8 * n**2 + epsilon * 64 * n**4)
    d = direction(r)
    converged = False
    message = "max_iters reached"
    k = 0
    for k in range(1, opts.max_iters + 1):
        slope = integrate(r * d)
        if slope >= 0:
            d = -r
            slope = integrate(r * d)
        t = tau
        while True:
            u_new = retract(u, d, t)
            E_new = _total(u_new, epsilon)
            if E_new <= E + opts.armijo * t * slope:
                break
            t *= opts.backtrack
            if t < 1e-16:
                message = "line search failed"
                break
        if message == "line search failed":
            break
        r_new = el_residual(u_new, epsilon)
        s = u_new - u
        y = r_new - r
        sy = integrate(s * y)
        u, E, r = u_new, E_new, r_new
        res = _l2(r)
        energies.append(E)
        residuals.append(res)
        if opts.log_every and k % opts.log_every == 0:
            print(f"iter={k} E={E:.15g} res={res:.6e}", file=stream)
        if opts.degree_every and k % opts.degree_every == 0:
            deg = int(round(solid_angle_degree(u)))
            if deg != deg_in:
                raise DegreeChangeError(f"degree changed from {deg_in} to {deg} at iteration {k}")
        if res <= tol:
            converged = True
            message = "converged"
            break
        if sy > 0:
            sMs = integrate(s * (pre.apply(s) if pre is not None else s))
            tau = sMs / sy
        else:
            tau = min(2 * t, 1e6)
        d = direction(r)

    deg_out = int(round(solid_angle_degree(u)))
    if deg_out != deg_in:
        raise DegreeChangeError(f"degree changed from {deg_in} to {deg_out}")
    if not converged:
        log.warning("minimize did not converge: %s (residual %.3e, tol %.3e)", message, res, tol)
    return MinimizeResult(u, k, res, converged, energies, residuals, deg_in, deg_out, epsilon, message)


def continuation_sweep(
    eps_list,
    u_seed,
    opts: MinimizeOptions | None = None,
    warm_start: bool = True,
    callback=None,
) -> list[MinimizeResult]:
    """Minimise along a strictly decreasing list of ``eps``, warm-starting each from the last.

    ``u_seed`` is the starting field for the first entry; with ``warm_start``
    off it may instead be a callable ``eps -> u0`` giving a fresh start per
    entry. ``callback(result)`` runs after every completed entry. The sweep
    stops with :class:`SweepError` (carrying the completed results) when a
    minimisation fails or the result is no longer resolved on the grid.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("empty epsilon list")
    if any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be positive and strictly decreasing")
    results: list[MinimizeResult] = []
    u = None
    for eps in eps_list:
        if warm_start and u is not None:
            u0 = u
        else:
            u0 = u_seed(eps) if callable(u_seed) else u_seed
        try:
            res = minimize(u0, eps, opts)
            check_resolution(res.u)
        except (DegenerateRetractionError, DegreeChangeError, ResolutionGuardError) as exc:
            raise SweepError(eps, exc, results) from exc
        if not res.converged:
            raise SweepError(eps, res.message, results)
        results.append(res)
        if callback is not None:
            callback(res)
        u = res.u
    return results
