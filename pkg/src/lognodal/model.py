"""Energy functional, Nehari constraint and projections.

Functions are stored in Emden-Fowler form: for t = log r,

    y = r^m u,   z = r^{m+1} u',   m = (N - 2) / 2.

Both stay of order one for a bubble of any scale, and every integral the
functional needs has a density in (t, y, z) with no negative powers of r:

    int |grad u|^2  = int z^2          dmu
    int u^2         = int e^{2t} y^2   dmu
    int |u|^q       = int e^{(N - m q) t} |y|^q dmu
    int u^2 log u^2 = int e^{2t} y^2 (log y^2 - 2 m t) dmu

with dmu = (sphere area) dt.  Plain values ``u`` and ``u'`` are available
as properties but may overflow for very concentrated solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .quadrature import RadialGrid, integrate_density

TINY = 1e-300


@dataclass(frozen=True)
class Params:
    """Problem data for -Lap u = lam u + |u|^{p-2} u + theta u log u^2 on B_R.

    ``exponent`` defaults to the critical exponent 2N/(N-2).
    """

    dim: int = 6
    lam: float = 0.0
    theta: float = 1.0
    exponent: float | None = None
    radius: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if not self.theta > 0:
            raise ValueError(f"theta must be strictly positive, got {self.theta}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        ps = self.pstar
        p = ps if self.exponent is None else float(self.exponent)
        if not 2.0 < p <= ps:
            raise ValueError(f"exponent must lie in (2, {ps}], got {p}")
        object.__setattr__(self, "exponent", p)
        for name in ("lam", "theta", "radius"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def pstar(self) -> float:
        return 2.0 * self.dim / (self.dim - 2.0)

    @property
    def p(self) -> float:
        return self.exponent

    @property
    def m(self) -> float:
        return 0.5 * (self.dim - 2.0)

    @property
    def critical(self) -> bool:
        return self.exponent == self.pstar

    def replace(self, **kw) -> "Params":
        d = dict(dim=self.dim, lam=self.lam, theta=self.theta,
                 exponent=self.exponent, radius=self.radius)
        d.update(kw)
        return Params(**d)

    def to_dict(self) -> dict:
        return {"N": self.dim, "lambda": self.lam, "theta": self.theta,
                "p": self.exponent, "R": self.radius}


@dataclass(frozen=True)
class RadialFn:
    """A radial function sampled on the abscissae of a grid.

    Parameters
    ----------
    grid : RadialGrid
    y, z : ndarray
        Emden-Fowler samples r^m u and r^{m+1} u'.
    """

    grid: RadialGrid
    y: np.ndarray
    z: np.ndarray
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if y.shape != self.grid.t.shape or z.shape != y.shape:
            raise ValueError("samples must match the grid abscissae")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise ValueError("radial function has non-finite samples")
        y.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_values(cls, grid: RadialGrid, values, derivs) -> "RadialFn":
        m = 0.5 * (grid.dim - 2.0)
        u = np.asarray(values, dtype=float)
        du = np.asarray(derivs, dtype=float)
        return cls(grid, np.exp(m * grid.t) * u, np.exp((m + 1.0) * grid.t) * du)

    @classmethod
    def from_callable(cls, grid: RadialGrid, f, df) -> "RadialFn":
        return cls.from_values(grid, f(grid.r), df(grid.r))

    @property
    def m(self) -> float:
        return 0.5 * (self.grid.dim - 2.0)

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(-self.m * self.grid.t) * self.y

    @property
    def derivs(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(-(self.m + 1.0) * self.grid.t) * self.z

    @property
    def log_abs_values(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.y)) - self.m * self.grid.t

    def scaled(self, s: float) -> "RadialFn":
        return RadialFn(self.grid, s * self.y, s * self.z, self.meta)

    def masked(self, mask) -> "RadialFn":
        """Copy that vanishes outside ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        return RadialFn(self.grid, np.where(mask, self.y, 0.0), np.where(mask, self.z, 0.0))

    def __add__(self, other: "RadialFn") -> "RadialFn":
        if other.grid is not self.grid:
            raise ValueError("functions live on different grids")
        return RadialFn(self.grid, self.y + other.y, self.z + other.z)

    def __neg__(self) -> "RadialFn":
        return self.scaled(-1.0)

    def is_zero(self) -> bool:
        return not np.any(self.y) and not np.any(self.z)


def log_nonlinearity(u):
    """u log u^2, extended by 0 at u = 0."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(u == 0.0, 0.0, 2.0 * u * np.log(np.abs(u)))
    return out if out.ndim else float(out)


def integrals(u: RadialFn, p: float) -> dict:
    """The four integrals entering the functional.

    Keys: ``grad`` (int |grad u|^2), ``l2`` (int u^2), ``lp`` (int |u|^p),
    ``log`` (int u^2 log u^2).
    """
    g = u.grid
    t, y = g.t, u.y
    m = u.m
    ay = np.abs(y)
    nz = ay > 0
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        la = np.where(nz, np.log(np.where(nz, ay, 1.0)), 0.0)
        e2 = np.where(nz, np.exp(2.0 * t + 2.0 * la), 0.0)
        lp = np.where(nz, np.exp((g.dim - m * p) * t + p * la), 0.0)
        lg = e2 * (2.0 * la - 2.0 * m * t)
    return {
        "grad": integrate_density(u.z ** 2, g),
        "l2": integrate_density(e2, g),
        "lp": integrate_density(lp, g),
        "log": integrate_density(lg, g),
    }


def _energy_from(I: dict, params: Params) -> float:
    p = params.exponent
    return (0.5 * I["grad"] - 0.5 * params.lam * I["l2"] - I["lp"] / p
            - 0.5 * params.theta * (I["log"] - I["l2"]))


def _nehari_from(I: dict, params: Params) -> float:
    return I["grad"] - params.lam * I["l2"] - I["lp"] - params.theta * I["log"]


def energy(u: RadialFn, params: Params) -> float:
    """L(u) = 1/2|grad u|^2 - lam/2 |u|^2 - 1/p |u|_p^p - theta/2 int u^2 (log u^2 - 1)."""
    return _energy_from(integrals(u, params.exponent), params)


def _check_nonzero(I: dict):
    if I["lp"] < TINY and I["grad"] < TINY:
        raise ValueError("function is numerically zero")


def nehari_residual(u: RadialFn, params: Params) -> float:
    """G(u) = L'(u)u."""
    I = integrals(u, params.exponent)
    _check_nonzero(I)
    return _nehari_from(I, params)


def relative_nehari_residual(u: RadialFn, params: Params) -> float:
    """|G(u)| / int |grad u|^2."""
    I = integrals(u, params.exponent)
    _check_nonzero(I)
    return abs(_nehari_from(I, params)) / I["grad"]


def reduced_energy(u: RadialFn, params: Params) -> float:
    """(1/2 - 1/p) int |u|^p + theta/2 int u^2, equal to L(u) - G(u)/2."""
    I = integrals(u, params.exponent)
    p = params.exponent
    return (0.5 - 1.0 / p) * I["lp"] + 0.5 * params.theta * I["l2"]


def sign_split(u: RadialFn):
    """(u+, u-) with u- = min(u, 0), so u+ + u- = u."""
    pos = u.y > 0
    neg = u.y < 0
    up = RadialFn(u.grid, np.where(pos, u.y, 0.0), np.where(pos, u.z, 0.0))
    um = RadialFn(u.grid, np.where(neg, u.y, 0.0), np.where(neg, u.z, 0.0))
    return up, um


def fibering_coefficients(u: RadialFn, params: Params):
    """(A, P, Q) with G(s u) = s^2 (A - s^{p-2} P - theta log(s^2) Q)."""
    I = integrals(u, params.exponent)
    _check_nonzero(I)
    A = I["grad"] - params.lam * I["l2"] - params.theta * I["log"]
    return A, I["lp"], I["l2"]


def nehari_project(u: RadialFn, params: Params, rtol: float = 1e-12) -> float:
    """The unique s > 0 with G(s u) = 0.

    Works in x = log s, where h(x) = A - e^{(p-2)x} P - 2 theta x Q is
    strictly decreasing, so any sign change brackets the root.
    """
    A, P, Q = fibering_coefficients(u, params)
    if P <= TINY:
        raise ValueError("function is numerically zero")
    p, th = params.exponent, params.theta

    def h(x):
        return A - math.exp(min((p - 2.0) * x, 700.0)) * P - 2.0 * th * x * Q

    lo, hi = math.log(1e-6), math.log(1e6)
    while h(lo) < 0:
        lo *= 2.0
        if lo < -1e4:
            raise AssertionError("failed to bracket the Nehari projection")
    while h(hi) > 0:
        hi *= 2.0
        if hi > 1e4:
            raise AssertionError("failed to bracket the Nehari projection")
    x = brentq(h, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    # Newton polish
    for _ in range(3):
        d = -(p - 2.0) * math.exp((p - 2.0) * x) * P - 2.0 * th * Q
        step = h(x) / d
        x -= step
        if abs(step) < rtol * 1e-2:
            break
    return math.exp(x)


def project_sign_changing(u: RadialFn, params: Params):
    """(s, t) with s u+ and t u- both on the Nehari set."""
    up, um = sign_split(u)
    if up.is_zero() or um.is_zero():
        raise ValueError("function does not change sign")
    return nehari_project(up, params), nehari_project(um, params)
