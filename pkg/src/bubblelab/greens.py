"""Green's function of the unit square torus and the regular part of its chart expansion.

``g`` solves ``-lap g = 2*pi*(delta_0 - 1)`` with zero mean. In the translation chart
``G(p, q) = g(p - q) = -log|x - y| + J(x, y)`` and ``J(x, y) = j(x - y)`` with
``j(x) = g(x) + log|x|`` smooth on the chart square.

Values are computed by Ewald summation: a screened real-space image sum built
from the exponential integral ``E1`` plus a Gaussian-damped Fourier tail.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as sp_integrate
from scipy import ndimage
from scipy.special import exp1

from .torus import ChartDisplacement, Grid, integrate, laplacian, wrap

EULER_GAMMA = 0.5772156649015329


class EwaldConvergenceError(RuntimeError):
    pass


class SingularPointError(ValueError):
    pass


def _e1_plus_log(t):
    """``E1(t) + log(t)``, finite at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < 1.0
    ts = t[small]
    # E1(t) = -gamma - log t - sum_k (-t)^k / (k k!)
    acc = np.zeros_like(ts)
    term = np.ones_like(ts)
    for k in range(1, 30):
        term = term * (-ts) / k
        acc -= term / k
    out[small] = -EULER_GAMMA + acc
    tb = t[~small]
    out[~small] = exp1(tb) + np.log(tb)
    return out


@dataclass(frozen=True)
class GreensEvaluator:
    """Ewald evaluator for the zero-mean torus Green's function.

    ``ewald_split`` is the Gaussian screening length ``s`` (screening exponent
    ``1/s**2``); ``real_space_cutoff`` and ``fourier_cutoff`` are the numbers of
    image and mode shells kept.
    """

    ewald_split: float = 1.0 / np.sqrt(np.pi)
    real_space_cutoff: int = 3
    fourier_cutoff: int = 3
    tail_tol: float = 1e-12
    _images: np.ndarray = field(init=False, repr=False, compare=False)
    _modes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.ewald_split <= 0:
            raise ValueError("ewald_split must be positive")
        nr, nf = self.real_space_cutoff, self.fourier_cutoff
        r = np.arange(-nr, nr + 1)
        images = np.array([(i, j) for i in r for j in r], dtype=float)
        f = np.arange(-nf, nf + 1)
        modes = np.array([(i, j) for i in f for j in f if (i, j) != (0, 0)], dtype=float)
        object.__setattr__(self, "_images", images)
        object.__setattr__(self, "_modes", modes)

    @property
    def alpha(self) -> float:
        return 1.0 / self.ewald_split**2

    def tail_bounds(self) -> tuple[float, float]:
        """Size of the leading omitted real-space and Fourier terms."""
        a = self.alpha
        d = self.real_space_cutoff + 0.5  # closest omitted image to the chart square
        real = np.exp(-a * d * d) / (a * d * d) * 8 * (self.real_space_cutoff + 1)
        m = self.fourier_cutoff + 1
        fourier = np.exp(-np.pi**2 * m * m / a) / (2 * np.pi * m * m) * 8 * m
        return float(real), float(fourier)

    def check_convergence(self):
        real, fourier = self.tail_bounds()
        if max(real, fourier) > self.tail_tol:
            raise EwaldConvergenceError(
                f"Ewald tails too large: real {real:.2e}, fourier {fourier:.2e}"
            )

    def _fourier(self, x):
        m = self._modes
        a = self.alpha
        m2 = np.sum(m * m, axis=1)
        weight = np.exp(-np.pi**2 * m2 / a) / m2
        phase = 2 * np.pi * (x @ m.T)
        val = np.cos(phase) @ weight / (2 * np.pi)
        gradv = -(np.sin(phase) * weight) @ m
        return val, gradv

    def _real(self, x, skip_origin):
        a = self.alpha
        val = np.zeros(x.shape[:-1])
        gradv = np.zeros(x.shape)
        for n in self._images:
            if skip_origin and not n.any():
                continue
            y = x + n
            r2 = np.sum(y * y, axis=-1)
            val += 0.5 * exp1(a * r2)
            gradv -= y * (np.exp(-a * r2) / r2)[..., None]
        return val, gradv

    def _origin_regular(self, x):
        """The n = 0 image with ``-log|x|`` removed: value and gradient."""
        a = self.alpha
        r2 = np.sum(x * x, axis=-1)
        t = a * r2
        val = 0.5 * _e1_plus_log(t) - 0.5 * np.log(a)
        # -x (exp(-t) - 1)/r^2 = a x (1 - exp(-t))/t, limit a x
        with np.errstate(invalid="ignore", divide="ignore"):
            fac = np.where(t > 1e-300, -np.expm1(-t) / np.where(t > 0, t, 1.0), 1.0)
        gradv = a * x * fac[..., None]
        return val, gradv

    def _prep(self, d, wrapped=True):
        if isinstance(d, ChartDisplacement):
            d = d.as_array()
        x = np.asarray(d, dtype=float)
        return wrap(x) if wrapped else x

    def g(self, d):
        """Green's function at chart displacement(s) ``d`` (last axis of length 2)."""
        x = self._prep(d)
        r2 = np.sum(x * x, axis=-1)
        if np.any(r2 == 0):
            raise SingularPointError("Green's function evaluated at its pole")
        rv, _ = self._real(x, skip_origin=False)
        fv, _ = self._fourier(x)
        return rv + fv - np.pi / (2 * self.alpha)

    def grad_g(self, d):
        x = self._prep(d)
        r2 = np.sum(x * x, axis=-1)
        if np.any(r2 == 0):
            raise SingularPointError("Green's function evaluated at its pole")
        _, rg = self._real(x, skip_origin=False)
        _, fg = self._fourier(x)
        return rg + fg

    def j(self, d):
        """Regular part ``j(x) = g(x) + log|x|`` (finite at 0)."""
        x = self._prep(d)
        rv, _ = self._real(x, skip_origin=True)
        ov, _ = self._origin_regular(x)
        fv, _ = self._fourier(x)
        return rv + ov + fv - np.pi / (2 * self.alpha)

    def grad_j(self, d, wrapped=True):
        x = self._prep(d, wrapped)
        _, rg = self._real(x, skip_origin=True)
        _, og = self._origin_regular(x)
        _, fg = self._fourier(x)
        return rg + og + fg

    def gradJ_y(self, d, wrapped=True):
        """``grad_y J(x, 0) = -grad j(x)``, equal to ``-grad g(x) - x/|x|^2`` off the origin.

        With ``wrapped=False`` the chart coordinates are used as given, which
        continues ``J`` analytically past the edges of the chart square.
        """
        return -self.grad_j(d, wrapped)


DEFAULT = GreensEvaluator()


def eval_g(d, evaluator: GreensEvaluator = DEFAULT):
    return evaluator.g(d)


def eval_gradJ_y(d, evaluator: GreensEvaluator = DEFAULT):
    return evaluator.gradJ_y(d)


class GradJTable:
    """Cubic-spline table of ``grad_y J(x, 0)`` on a square slightly larger than the chart.

    The regular part is analytic on the closed chart square (the nearest other
    poles sit at distance 1/2 from its edges), so interpolation is accurate to
    about 1e-11 at a small fraction of the Ewald cost.
    """

    def __init__(self, evaluator: GreensEvaluator = DEFAULT, nodes: int = 513, half_width: float = 0.5625):
        if nodes % 2 == 0:
            raise ValueError("table needs an odd node count so that 0 is a node")
        t = np.linspace(-half_width, half_width, nodes)
        m = nodes // 2
        # j is even in each coordinate: fill three quadrants by reflection
        X, Y = np.meshgrid(t[m:], t[m:], indexing="ij")
        q = evaluator.gradJ_y(np.stack([X, Y], axis=-1), wrapped=False)
        vals = np.empty((nodes, nodes, 2))
        vals[m:, m:] = q
        vals[:m + 1, m:] = q[::-1] * [-1, 1]
        vals[m:, :m + 1] = q[:, ::-1] * [1, -1]
        vals[:m + 1, :m + 1] = q[::-1, ::-1] * [-1, -1]
        self.half_width = half_width
        self.spacing = t[1] - t[0]
        self._coef = [ndimage.spline_filter(vals[..., c], order=3, mode="mirror") for c in range(2)]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self(x[None])[0]
        idx = (np.moveaxis(x, -1, 0) + self.half_width) / self.spacing
        out = np.empty(x.shape)
        for c in range(2):
            out[..., c] = ndimage.map_coordinates(self._coef[c], idx, order=3, mode="mirror", prefilter=False)
        return out


@lru_cache(maxsize=4)
def gradJ_table(evaluator: GreensEvaluator = DEFAULT) -> GradJTable:
    return GradJTable(evaluator)


def script_J_forms(a=None, c_gamma: float = 1.0, grid_n: int = 64) -> float:
    """``-2 pi c |phi(a)|^2`` for the L^2-normalised holomorphic one-form ``phi = dz/||dz||``.

    On the flat torus ``|dz| = 1`` pointwise, so ``a`` does not matter.
    """
    ones = np.ones((grid_n, grid_n))
    norm2 = integrate(ones)  # ||dz||^2 = area
    phi_a2 = 1.0 / norm2
    return -2 * np.pi * c_gamma * phi_a2


def _richardson_derivative(f, steps, order=2):
    """Richardson-extrapolate ``f(h)`` (error ~ h^order) over halving steps."""
    vals = np.array([f(h) for h in steps], dtype=float)
    ratio = steps[0] / steps[1]
    fac = ratio**order
    extrap = (fac * vals[1:] - vals[:-1]) / (fac - 1)
    return vals, extrap


@dataclass
class RegularPartJet:
    """Derivatives of ``J`` at the chart origin, obtained by differencing ``gradJ_y``."""

    mixed_hess: np.ndarray
    third_derivs: np.ndarray
    error_estimate: float
    steps: tuple = (1e-2, 5e-3, 2.5e-3)
    extrapolated_traces: np.ndarray | None = None

    def grad_at(self, x, evaluator: GreensEvaluator = DEFAULT):
        return evaluator.gradJ_y(np.asarray(x, dtype=float))

    @property
    def scriptJ(self) -> float:
        return float(np.trace(self.mixed_hess))


def regular_part_jet(evaluator: GreensEvaluator = DEFAULT, steps=(1e-2, 5e-3, 2.5e-3)) -> RegularPartJet:
    F = evaluator.gradJ_y
    e = np.eye(2)

    def hess(h):
        # hess[i, j] = d/dx_i (grad_y J)_j
        return np.array([(F(h * e[i]) - F(-h * e[i])) / (2 * h) for i in range(2)])

    def third(h):
        t = np.zeros((2, 2))
        F0 = F(np.zeros(2))
        for i in range(2):
            for k in range(2):
                if i == k:
                    d2 = (F(h * e[i]) - 2 * F0 + F(-h * e[i])) / h**2
                else:
                    d2 = (
                        F(h * (e[i] + e[k])) - F(h * (e[i] - e[k])) - F(h * (e[k] - e[i])) + F(-h * (e[i] + e[k]))
                    ) / (4 * h * h)
                t[i, k] = d2[k]
        return t

    hs = [hess(h) for h in steps]
    traces = np.array([np.trace(m) for m in hs])
    rich = [(4 * hs[k + 1] - hs[k]) / 3 for k in range(len(steps) - 1)]
    rich_tr = np.array([np.trace(m) for m in rich])
    best = rich[-1]
    err = float(np.max(np.abs(rich[-1] - rich[-2]))) if len(rich) > 1 else float(abs(traces[-1] - traces[-2]))
    thirds = [third(h) for h in steps[-2:]]
    third_ex = (4 * thirds[1] - thirds[0]) / 3
    return RegularPartJet(
        mixed_hess=best, third_derivs=third_ex, error_estimate=err, steps=tuple(steps), extrapolated_traces=rich_tr
    )


def script_J_greens(evaluator: GreensEvaluator = DEFAULT, rtol: float = 1e-3) -> float:
    """Trace of the mixed Hessian of ``J`` at the origin, by differencing."""
    jet = regular_part_jet(evaluator)
    value = jet.scriptJ
    if jet.error_estimate > rtol * abs(value):
        raise ArithmeticError(
            f"differencing error {jet.error_estimate:.2e} exceeds {rtol:g} relative"
        )
    return value


def sample_g(grid: Grid, evaluator: GreensEvaluator = DEFAULT) -> np.ndarray:
    """``g`` at every node relative to the origin node; NaN at the pole."""
    from .torus import TorusPoint

    x = grid.displacements(TorusPoint(0.0, 0.0))
    r2 = np.sum(x * x, axis=-1)
    out = np.full(r2.shape, np.nan)
    ok = r2 > 0
    out[ok] = evaluator.g(x[ok])
    return out


def check_pde_residual(
    grid: Grid,
    evaluator: GreensEvaluator = DEFAULT,
    mask_radius: float | None = None,
    annulus: tuple[float, float] | None = None,
) -> float:
    """Max of ``|-lap_h g + 2 pi|`` away from the pole.

    By default nodes within ``3h`` of the pole are excluded; ``annulus`` restricts
    the maximum to ``r_in <= |x| <= r_out``.
    """
    g = sample_g(grid, evaluator)
    g_filled = np.where(np.isnan(g), 0.0, g)
    res = np.abs(-laplacian(g_filled) + 2 * np.pi)
    from .torus import TorusPoint

    x = grid.displacements(TorusPoint(0.0, 0.0))
    r = np.hypot(x[..., 0], x[..., 1])
    if mask_radius is None:
        mask_radius = 3 * grid.h
    keep = r >= mask_radius
    if annulus is not None:
        keep &= (r >= annulus[0]) & (r <= annulus[1])
    return float(np.max(res[keep]))


def _bump(r, r0=0.1, r1=0.4):
    """C-infinity radial cutoff, 1 on [0, r0] and 0 beyond r1."""

    def psi(t):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)

    s = (np.asarray(r, dtype=float) - r0) / (r1 - r0)
    return psi(1 - s) / (psi(1 - s) + psi(s))


def mean_of_g(grid: Grid, evaluator: GreensEvaluator = DEFAULT) -> float:
    """``integral of g`` with the log singularity subtracted and integrated radially."""
    from .torus import TorusPoint

    x = grid.displacements(TorusPoint(0.0, 0.0))
    r = np.hypot(x[..., 0], x[..., 1])
    w = _bump(r)
    smooth = evaluator.j(x) - np.log(np.where(r > 0, r, 1.0)) * (1 - w)
    # g + w log r = j - (1 - w) log r, smooth and periodic
    log_part, _ = sp_integrate.quad(lambda s: 2 * np.pi * s * np.log(s) * float(_bump(s)), 0.0, 0.4, limit=200)
    return integrate(smooth) - log_part
