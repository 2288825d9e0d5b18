"""Numerical lab for epsilon-regularised harmonic maps from the flat square torus to the sphere.

Modules
-------
torus     grid, wrapped charts and periodic stencils
greens    Ewald-summed Green's function and its regular part
models    the glued bubble family ``z(lam, a, R)`` and the z inner product
energy    discrete epsilon-energy, variations, degree, expansion formulas
minimize  sphere-constrained descent and epsilon continuation
fit       recovery of ``(a, lam, R)`` from a sampled map
verify    quadrature checks of the expansions and property probes
cli       batch driver (``python -m bubblelab``)
"""

__version__ = "0.1.0"
