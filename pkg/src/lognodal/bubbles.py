"""Aubin-Talenti bubbles, the cut-off bubble psi_eps and its asymptotics.

U_eps(r) = [N(N-2) eps^2]^{(N-2)/4} / (eps^2 + r^2)^{(N-2)/2}

solves -Lap U = U^{2*-1} on R^N with int |grad U|^2 = int U^{2*} = S^{N/2}.
psi_eps = xi U_eps with xi = 1 on [0, rho], 0 beyond 2 rho.

The defects int |grad psi|^2 - S^{N/2} and int psi^{2*} - S^{N/2} are of
order eps^{N-2} and eps^N, far below the rounding error of S^{N/2} itself
for small eps.  Since psi = U on [0, rho] they are computed as integrals
over r > rho only, which involve no cancellation against S^{N/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import RadialFn
from .quadrature import RadialGrid, _gauss, integrate, integrate_halfline, log_grid, sphere_area

QUANTITIES = ("grad_sq_defect", "crit_norm_defect", "l2_norm", "l1_norm",
              "crit_minus_one_norm", "log_moment")


def expected_exponents(dim: int) -> dict:
    """Leading power of eps for each swept quantity, with fit tolerances.

    The L^2 entry assumes N >= 5 (N = 4 picks up a log and N = 3 a
    different power).
    """
    q = (dim - 2) / 2.0
    return {
        "grad_sq_defect": (dim - 2.0, 0.3),
        "crit_norm_defect": (float(dim), 0.5),
        "l2_norm": (2.0, 0.1),
        "l1_norm": (q, 0.15),
        "crit_minus_one_norm": (q, 0.15),
    }


def _amp(eps: float, dim: int) -> float:
    return (dim * (dim - 2.0) * eps * eps) ** ((dim - 2.0) / 4.0)


def bubble_value(eps: float, r, dim: int):
    """U_eps(r)."""
    r = np.asarray(r, dtype=float)
    out = _amp(eps, dim) / (eps * eps + r * r) ** ((dim - 2.0) / 2.0)
    return out if out.ndim else float(out)


def bubble_deriv(eps: float, r, dim: int):
    """U_eps'(r) = -(N-2) r U_eps(r) / (eps^2 + r^2)."""
    r = np.asarray(r, dtype=float)
    out = -(dim - 2.0) * r * bubble_value(eps, r, dim) / (eps * eps + r * r)
    return out if out.ndim else float(out)


def bubble_log_value(eps: float, r, dim: int):
    """log U_eps(r), safe for tiny eps and large r."""
    r = np.asarray(r, dtype=float)
    out = (dim - 2.0) / 4.0 * (math.log(dim * (dim - 2.0)) + 2.0 * math.log(eps)) \
        - (dim - 2.0) / 2.0 * np.log(eps * eps + r * r)
    return out if out.ndim else float(out)


def bubble_integrals(eps: float, dim: int) -> tuple:
    """(int |grad U_eps|^2, int U_eps^{2*}) over R^N."""
    if dim < 3:
        raise ValueError("dimension must be at least 3")
    ps = 2.0 * dim / (dim - 2.0)
    grad = integrate_halfline(lambda r: bubble_deriv(eps, r, dim) ** 2, eps, dim,
                              panels=64, order=16)
    crit = integrate_halfline(lambda r: bubble_value(eps, r, dim) ** ps, eps, dim,
                              panels=64, order=16)
    return grad, crit


def sobolev_level(dim: int, eps: float = 1.0, check_tol: float = 1e-8) -> float:
    """S^{N/2} as int |grad U_eps|^2 over R^N.

    Cross-checked against int U_eps^{2*}; a disagreement beyond
    ``check_tol`` (relative) raises, since both equal S^{N/2}.
    """
    grad, crit = bubble_integrals(eps, dim)
    if abs(grad - crit) > check_tol * grad:
        raise ArithmeticError(f"gradient and critical integrals disagree: {grad} vs {crit}")
    return grad


def sobolev_constant(dim: int) -> float:
    """S from S^{N/2} (numerical, via sobolev_level)."""
    return sobolev_level(dim) ** (2.0 / dim)


def talenti_constant(dim: int) -> float:
    """Best Sobolev constant in closed form, pi N (N-2) (Gamma(N/2)/Gamma(N))^{2/N}."""
    return math.pi * dim * (dim - 2.0) * math.exp(
        2.0 / dim * (math.lgamma(dim / 2.0) - math.lgamma(dim)))


def _smoothstep(x):
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def cutoff(r, rho: float):
    """1 on [0, rho], 0 on [2 rho, inf), quintic smoothstep in between."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    r = np.asarray(r, dtype=float)
    x = np.clip((r - rho) / rho, 0.0, 1.0)
    out = 1.0 - _smoothstep(x)
    return out if out.ndim else float(out)


def cutoff_deriv(r, rho: float):
    r = np.asarray(r, dtype=float)
    x = np.clip((r - rho) / rho, 0.0, 1.0)
    out = -30.0 * x * x * (1.0 - x) ** 2 / rho
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BubbleSpec:
    """Cut-off bubble data; ``rho`` defaults to R/4 for the unit ball."""

    eps: float
    rho: float = 0.25
    dim: int = 6

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if int(self.dim) != self.dim or self.dim < 3:
            raise ValueError("dimension must be an integer >= 3")

    def with_eps(self, eps: float) -> "BubbleSpec":
        return BubbleSpec(eps, self.rho, self.dim)

    def value(self, r):
        return cutoff(r, self.rho) * bubble_value(self.eps, r, self.dim)

    def deriv(self, r):
        return (cutoff_deriv(r, self.rho) * bubble_value(self.eps, r, self.dim)
                + cutoff(r, self.rho) * bubble_deriv(self.eps, r, self.dim))


def psi_eps(spec: BubbleSpec, grid: RadialGrid) -> RadialFn:
    """xi U_eps sampled on a grid (values and exact derivative)."""
    if grid.R < 2.0 * spec.rho * (1 - 1e-14):
        raise ValueError("grid radius smaller than the cut-off support 2 rho")
    if grid.dim != spec.dim:
        raise ValueError("grid dimension differs from the bubble's")
    fn = RadialFn.from_values(grid, spec.value(grid.r), spec.deriv(grid.r))
    fn.meta["bubble"] = spec
    return fn


def bubble_grid(spec: BubbleSpec, R: float | None = None, order: int = 12,
                width: float = 0.25) -> RadialGrid:
    """Log grid resolving the bubble core and with edges at rho and 2 rho."""
    R = 2.0 * spec.rho if R is None else R
    lo = math.log(spec.eps) - 12.0
    b = [lo, math.log(spec.rho), math.log(2.0 * spec.rho)]
    if R > 2.0 * spec.rho * (1 + 1e-12):
        b.append(math.log(R))
    b = sorted(set(b))
    if b[0] >= b[1]:
        b[0] = b[1] - 12.0
    return log_grid(b, spec.dim, order=order, width=width)


def _tail_integral(f, rho: float, dim: int, panels: int = 32, order: int = 16) -> float:
    """int_{|x| > rho} f(|x|) dx via r = rho / s."""
    x, gw = _gauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    s = (0.5 * (a + b) + 0.5 * (b - a) * x).ravel()
    ws = (0.5 * (b - a) * gw).ravel()
    r = rho / s
    vals = np.asarray(f(r), dtype=float) * r ** (dim - 1) * rho / (s * s)
    return float(sphere_area(dim) * np.sum(ws * vals))


def _shell_integral(f, rho: float, dim: int, panels: int = 16, order: int = 16) -> float:
    """int_{rho < |x| < 2 rho} f(|x|) dx."""
    x, gw = _gauss(order)
    edges = np.linspace(rho, 2.0 * rho, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    r = (0.5 * (a + b) + 0.5 * (b - a) * x).ravel()
    w = (0.5 * (b - a) * gw).ravel()
    return float(sphere_area(dim) * np.sum(w * np.asarray(f(r)) * r ** (dim - 1)))


def bubble_quantity(name: str, spec: BubbleSpec, grid: RadialGrid | None = None) -> float:
    """One of QUANTITIES evaluated for psi_eps."""
    eps, rho, N = spec.eps, spec.rho, spec.dim
    ps = 2.0 * N / (N - 2.0)
    if name == "grad_sq_defect":
        return (_shell_integral(lambda r: spec.deriv(r) ** 2, rho, N)
                - _tail_integral(lambda r: bubble_deriv(eps, r, N) ** 2, rho, N))
    if name == "crit_norm_defect":
        return (_shell_integral(lambda r: spec.value(r) ** ps, rho, N)
                - _tail_integral(lambda r: bubble_value(eps, r, N) ** ps, rho, N))
    g = bubble_grid(spec) if grid is None else grid
    r = g.r
    if name == "l2_norm":
        return integrate(spec.value(r) ** 2, g)
    if name == "l1_norm":
        return integrate(np.abs(spec.value(r)), g)
    if name == "crit_minus_one_norm":
        return integrate(np.abs(spec.value(r)) ** (ps - 1.0), g)
    if name == "log_moment":
        xi = cutoff(r, rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            lv = np.where(xi > 0, 2.0 * (np.log(np.where(xi > 0, xi, 1.0))
                                         + bubble_log_value(eps, r, N)), 0.0)
        v2 = spec.value(r) ** 2
        return integrate(v2 * lv, g)
    raise ValueError(f"unknown quantity {name!r}; expected one of {QUANTITIES}")


@dataclass
class AsymptoticFit:
    """Least-squares power law for a quantity along an eps sweep.

    For ``log_corrected`` fits, ``coefficient`` is C_1 of the two-term law
    value = C_1 eps^2 |log eps| + C_2 eps^2 (fitted linearly in |log eps|
    after dividing by eps^2) and ``r_squared`` refers to that fit;
    ``exponent`` is still the slope of log|value| against
    log(eps^2 |log eps|).
    """

    quantity: str
    exponent: float
    coefficient: float
    r_squared: float
    eps_range: tuple
    log_corrected: bool = False
    eps: np.ndarray = field(default=None, repr=False)
    values: np.ndarray = field(default=None, repr=False)
    second_coefficient: float | None = None
    window_coefficients: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.r_squared <= 1.0 + 1e-12:
            raise ValueError("r_squared outside [0, 1]")
        self.r_squared = min(self.r_squared, 1.0)

    @property
    def coefficient_spread(self) -> float:
        """max relative deviation of rolling-window C_1 from the full fit."""
        if not self.window_coefficients:
            return 0.0
        c = np.array(self.window_coefficients)
        return float(np.max(np.abs(c - self.coefficient)) / abs(self.coefficient))


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef[0], coef[1], max(0.0, r2)


def default_eps_list(rho: float = 0.25, lo: int = 4, hi: int = 10):
    return [rho * 2.0 ** (-j) for j in range(lo, hi + 1)]


def asymptotic_sweep(quantity: str, eps_list=None, spec: BubbleSpec | None = None,
                     grid: RadialGrid | None = None, window: int = 5) -> AsymptoticFit:
    """Evaluate a quantity along eps_list and fit its power law in eps."""
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")
    spec = spec or BubbleSpec(1.0)
    eps = np.sort(np.asarray(eps_list if eps_list is not None
                             else default_eps_list(spec.rho), dtype=float))
    if eps.size < 5:
        raise ValueError("need at least 5 eps values")
    if np.any(eps > spec.rho / 4.0 * (1 + 1e-12)):
        raise ValueError("eps values must not exceed rho / 4")
    vals = np.array([bubble_quantity(quantity, spec.with_eps(e), grid) for e in eps])
    if not np.all(np.isfinite(vals)) or np.any(vals == 0):
        raise ArithmeticError("quantity vanished or is not finite along the sweep")
    if quantity in ("l2_norm", "log_moment") and np.any(vals <= 0):
        raise ArithmeticError(f"{quantity} must be positive along the sweep")
    if quantity != "log_moment":
        k, c, r2 = _linfit(np.log(eps), np.log(np.abs(vals)))
        return AsymptoticFit(quantity, float(k), float(np.sign(vals[0]) * math.exp(c)),
                             float(r2), (float(eps[0]), float(eps[-1])), False, eps, vals)
    L = np.abs(np.log(eps))
    k, _, _ = _linfit(np.log(eps * eps * L), np.log(vals))
    c1, c2, r2 = _linfit(L, vals / (eps * eps))
    wins = []
    for i in range(0, eps.size - window + 1):
        w1, _, _ = _linfit(L[i:i + window], vals[i:i + window] / eps[i:i + window] ** 2)
        wins.append(float(w1))
    return AsymptoticFit(quantity, float(k), float(c1), float(r2),
                         (float(eps[0]), float(eps[-1])), True, eps, vals, float(c2), wins)
