"""Radial nodal solutions of -Lap u = lam u + |u|^{p-2} u + theta u log u^2 on balls."""

from .model import Params, RadialFn, energy, nehari_residual
from .quadrature import RadialGrid, build_grid, integrate

__all__ = ["Params", "RadialFn", "RadialGrid", "build_grid", "energy", "integrate",
           "nehari_residual"]
__version__ = "0.1.0"
