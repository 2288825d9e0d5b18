"""The unit square torus R^2/Z^2: points, charts, periodic grids and stencils.

Fields are numpy arrays indexed ``f[i, j]`` at the node ``(x, y) = (i*h, j*h)``.
Vector-valued fields carry their components on a trailing axis, so a map into
S^2 has shape ``(n, n, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Half the injectivity radius of the unit square torus, the chart radius and
# the inner cutoff radius used by the singularity models.
IOTA = 0.25
RHO = 2 * IOTA
R_CUT = RHO / 4


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x) % 1.0)
        object.__setattr__(self, "y", float(self.y) % 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class ChartDisplacement:
    dx: float
    dy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy])

    def __neg__(self):
        return ChartDisplacement(-self.dx, -self.dy)


def wrap(d):
    """Reduce coordinates elementwise into (-1/2, 1/2]."""
    d = np.asarray(d, dtype=float)
    w = d - np.ceil(d - 0.5)
    return w


def wrap_displacement(p: TorusPoint, a: TorusPoint) -> ChartDisplacement:
    """Coordinates of ``p`` in the translation chart centred at ``a``."""
    dx, dy = wrap([p.x - a.x, p.y - a.y])
    return ChartDisplacement(float(dx), float(dy))


def geodesic_distance(p: TorusPoint, q: TorusPoint) -> float:
    d = wrap_displacement(p, q)
    return float(np.hypot(d.dx, d.dy))


@dataclass(frozen=True)
class Grid:
    """Node-centred periodic grid with ``n`` points per side."""

    n: int

    def __post_init__(self):
        n = self.n
        if n < 4 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two, got {n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(X, Y)`` with ``X[i, j] = i*h``."""
        t = np.arange(self.n) * self.h
        return np.meshgrid(t, t, indexing="ij")

    def displacements(self, a: TorusPoint) -> np.ndarray:
        """Wrapped chart coordinates ``x = p - a`` of every node, shape (n, n, 2)."""
        X, Y = self.coords()
        return np.stack([wrap(X - a.x), wrap(Y - a.y)], axis=-1)

    def nearest_node(self, p: TorusPoint) -> tuple[int, int]:
        return (int(round(p.x * self.n)) % self.n, int(round(p.y * self.n)) % self.n)


def grid_of(f: np.ndarray) -> Grid:
    return Grid(f.shape[0])


def _shift(f, k, axis):
    return np.roll(f, -k, axis=axis)


def diff(f: np.ndarray, axis: int, h: float | None = None) -> np.ndarray:
    """Central difference (f[i+1] - f[i-1]) / 2h along ``axis`` (0 = x, 1 = y)."""
    if h is None:
        h = 1.0 / f.shape[0]
    return (_shift(f, 1, axis) - _shift(f, -1, axis)) / (2 * h)


def grad(f: np.ndarray) -> np.ndarray:
    """Central-difference gradient; the derivative index is appended last.

    A scalar field of shape (n, n) gives (n, n, 2); a vector field (n, n, 3)
    gives (n, n, 3, 2).
    """
    h = 1.0 / f.shape[0]
    return np.stack([diff(f, 0, h), diff(f, 1, h)], axis=-1)


def grad_adjoint(g: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`grad` for the plain grid sum: ``sum(grad(f)*g) == sum(f*grad_adjoint(g))``."""
    h = 1.0 / g.shape[0]
    # the central difference is antisymmetric
    return -(diff(g[..., 0], 0, h) + diff(g[..., 1], 1, h))


def laplacian(f: np.ndarray) -> np.ndarray:
    """Five-point Laplacian with periodic indexing, applied componentwise."""
    h = 1.0 / f.shape[0]
    return (
        _shift(f, 1, 0) + _shift(f, -1, 0) + _shift(f, 1, 1) + _shift(f, -1, 1) - 4 * f
    ) / h**2


def bilaplacian(f: np.ndarray) -> np.ndarray:
    return laplacian(laplacian(f))


def wide_laplacian(f: np.ndarray) -> np.ndarray:
    """``-grad_adjoint(grad f)``: the 2h-spaced Laplacian generated by central differences."""
    h = 1.0 / f.shape[0]
    return (diff(diff(f, 0, h), 0, h)) + diff(diff(f, 1, h), 1, h)


def integrate(f: np.ndarray) -> float:
    """Periodic trapezoid rule over the unit torus; sums over trailing axes too."""
    n = f.shape[0]
    return float(np.sum(f) / n**2)


def laplacian_symbol(n: int) -> np.ndarray:
    """Eigenvalues of :func:`laplacian` on the FFT modes, shape (n, n)."""
    h = 1.0 / n
    k = 2 * np.pi * np.fft.fftfreq(n)
    s = (2 * np.cos(k) - 2) / h**2
    return s[:, None] + s[None, :]


def wide_laplacian_symbol(n: int) -> np.ndarray:
    h = 1.0 / n
    k = 2 * np.pi * np.fft.fftfreq(n)
    s = -(np.sin(k) / h) ** 2
    return s[:, None] + s[None, :]
