"""Radial shooting for solutions with a prescribed number of nodal domains.

The initial value problem is integrated by the compiled kernel in
Emden-Fowler variables (see :mod:`lognodal._kernels`).  The shooting
parameter is the log-scale tau of the bubble that matches the centre value,

    a = u(0) = (N (N - 2))^{m/2} e^{-m tau},

so that amplitudes far beyond the double range (sign-changing solutions at
the standard parameters need log a ~ 10^2 .. 10^3) are handled without
overflow.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as kern
from .model import (Params, RadialFn, energy, log_nonlinearity, nehari_residual,
                    relative_nehari_residual)
from .quadrature import log_grid

REASONS = {
    kern.TERM_REACHED: "reached_R",
    kern.TERM_NODE_LIMIT: "node_limit",
    kern.TERM_STEP_FAILURE: "step_failure",
    kern.TERM_BLOW_UP: "blow_up",
    kern.TERM_TANGENCY: "tangency",
}

DEFAULT_RTOL = 1e-12
TANGENCY = 1e-9
START_OFFSET = 25.0      # start this far (in log r) below the bubble scale
MAX_STEPS = 50_000_000
GRADE = 24              # geometric panel levels towards each zero


def default_rtol() -> float:
    """Integrator tolerance, overridable through LOGNODAL_TOL."""
    env = os.environ.get("LOGNODAL_TOL")
    if env:
        try:
            val = float(env)
        except ValueError:
            raise ValueError(f"LOGNODAL_TOL is not a number: {env!r}") from None
        if not 0 < val < 1e-3:
            raise ValueError(f"LOGNODAL_TOL out of range: {val}")
        return val
    return DEFAULT_RTOL


class ShootingError(RuntimeError):
    """Shooting failed; ``scan`` holds the table of probed parameters."""

    def __init__(self, msg, scan=None):
        super().__init__(msg)
        self.scan = scan or []


class TangencyError(ShootingError):
    pass


def _pvec(params: Params) -> np.ndarray:
    return kern.param_vector(float(params.dim), params.lam, params.theta, params.exponent)


# ----------------------------------------------------------------------------
# plain r-form of the equation


def nonlinearity(u, params: Params):
    """f(u) = lam u + |u|^{p-2} u + theta u log u^2."""
    u = np.asarray(u, dtype=float)
    out = params.lam * u + np.abs(u) ** (params.exponent - 2.0) * u \
        + params.theta * np.asarray(log_nonlinearity(u))
    return out if out.ndim else float(out)


def rhs(r: float, u: float, v: float, params: Params):
    """(u', v') for the radial equation written as a first order system."""
    if r <= 0:
        raise ValueError("rhs is singular at r = 0, use series_start")
    return v, -(params.dim - 1.0) / r * v - nonlinearity(u, params)


def series_start(a: float, params: Params, r0: float | None = None):
    """(u(r0), u'(r0)) from u = a - f(a) r^2 / (2N) + O(r^4)."""
    if a == 0:
        raise ValueError("centre value must be non-zero")
    if r0 is None:
        r0 = 1e-6 * params.radius
    fa = nonlinearity(a, params)
    N = params.dim
    return a - fa * r0 * r0 / (2.0 * N), -fa * r0 / N


def tau_from_log_a(log_a: float, dim: int) -> float:
    m = 0.5 * (dim - 2.0)
    return (0.5 * m * math.log(dim * (dim - 2.0)) - log_a) / m


def log_a_from_tau(tau: float, dim: int) -> float:
    m = 0.5 * (dim - 2.0)
    return 0.5 * m * math.log(dim * (dim - 2.0)) - m * tau


# ----------------------------------------------------------------------------
# start states


def _center_start(tau: float, sign: float, params: Params, r0: float):
    """Kernel state at t0 for the solution with centre value sign * a(tau).

    The deviation from the bubble follows from the series of u and of the
    bubble: u - U = -(f(a) - a^{2*-1}) r^2 / (2N) + O(r^4).
    """
    N = params.dim
    m = params.m
    p = params.exponent
    ps = params.pstar
    la = log_a_from_tau(tau, N)
    t0 = min(math.log(r0), tau - START_OFFSET)
    # c = (f(a) - a^{2*-1}) / a = lam + 2 theta log a + a^{p-2} - a^{2*-2}
    c1 = params.lam + 2.0 * params.theta * la
    if p == ps:
        c = c1
        lc = math.log(abs(c)) if c != 0 else -math.inf
    else:
        # a^{2*-2} expm1(-(2*-p) log a), in log form
        em = math.expm1(-(ps - p) * la)
        if em == 0.0:
            lc2 = -math.inf
        else:
            lc2 = (ps - 2.0) * la + math.log(abs(em))
        if lc2 > 600.0:
            c = math.copysign(1.0, em)
            lc = lc2 + math.log1p(max(-0.999, c1 * c * math.exp(-lc2)))
        else:
            c = c1 + math.copysign(math.exp(lc2), em) if lc2 > -math.inf else c1
            lc = math.log(abs(c)) if c != 0 else -math.inf
    if not math.isfinite(lc):
        mu = 0.0
        w0 = 0.0
    else:
        mu = la + (m + 2.0) * t0 - math.log(2.0 * N) + lc
        w0 = -sign * math.copysign(1.0, c)
    return t0, w0, (m + 2.0) * w0, tau, float(sign), mu


def _node_start(t: float, sign: float, log_slope: float, P):
    """Kernel state just after a zero of y at t with y_t = sign * e^log_slope."""
    tref, sig, w, v, mu = kern.rereference(t, float(sign), log_slope, P)
    return t, w, v, tref, sig, mu


# ----------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Output of one kernel run.

    Attributes
    ----------
    t_start, t_end : float
        log r at the first and last stored point.
    nodes_t : ndarray
        log-radii of the zeros of u found along the way.
    termination_reason : str
        One of reached_R, node_limit, blow_up, step_failure, tangency.
    """

    params: Params
    rtol: float
    raw: tuple
    start: tuple
    cap: tuple | None = None
    termination_reason: str = "reached_R"

    def __post_init__(self):
        ts = self.raw[0]
        self.t_start = float(ts[0])
        self.t_end = float(ts[-1])
        self.nodes_t = np.array(self.raw[7])
        self.node_signs = np.array(self.raw[8])
        self.node_log_slopes = np.array(self.raw[9])
        self._P = _pvec(self.params)

    @property
    def m(self) -> float:
        return self.params.m

    def state_scaled(self, t, with_z=False):
        """Scaled (y, y_t, nu): actual values are e^nu times the first two.

        With ``with_z`` the scaled z = y_t - m y is inserted before nu; it is
        computed without the cancellation that y_t - m y suffers near the
        centre.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ts, ws, vs, mus, seg, trefs, sigs = self.raw[:7]
        y, yt, z, nu = kern.evaluate(t, ts, ws, vs, mus, seg, trefs, sigs, self._P, self.rtol)
        below = t < self.t_start
        if np.any(below):
            if self.cap is None:
                y[below] = 0.0
                yt[below] = 0.0
                z[below] = 0.0
                nu[below] = 0.0
            else:
                cy, cyt, cz = self._cap_state(t[below])
                y[below] = cy
                yt[below] = cyt
                z[below] = cz
                nu[below] = 0.0
        if with_z:
            return y, yt, z, nu
        return y, yt, nu

    def _cap_state(self, t):
        # leading order near the centre: bubble plus the r^2 correction
        tau, sign, t0, w0, mu0 = self.cap
        m = self.m
        K = self._P[7]
        s = t - tau
        Y = np.empty_like(s)
        dY = np.empty_like(s)
        zY = np.empty_like(s)
        for i, si in enumerate(s):
            lY, th = kern.log_bubble(si, m, K)
            Y[i] = math.exp(lY)
            dY[i] = -m * th * Y[i]
            e = math.exp(-2.0 * abs(si))
            zY[i] = -m * Y[i] * (2.0 * e / (1.0 + e) if si < 0 else 2.0 / (1.0 + e))
        with np.errstate(under="ignore"):
            corr = w0 * np.exp(mu0 + (m + 2.0) * (t - t0))
        return sign * Y + corr, sign * dY + (m + 2.0) * corr, sign * zY + 2.0 * corr

    def state(self, t):
        """Actual (y, y_t) at log-radii t; may underflow to zero in tails."""
        y, yt, nu = self.state_scaled(t)
        with np.errstate(under="ignore", over="ignore"):
            e = np.exp(nu)
            return y * e, yt * e

    def state_yz(self, t):
        """Actual (y, z) with z = y_t - m y computed without cancellation."""
        y, _yt, z, nu = self.state_scaled(t, with_z=True)
        with np.errstate(under="ignore", over="ignore"):
            e = np.exp(nu)
            return y * e, z * e

    def y_end(self) -> float:
        y, _ = self.state(np.array([self.t_end]))
        return float(y[0])

    def end_phase(self) -> float:
        """y / hypot(y, y_t) at the outer end.

        Same sign as y(t_end) and zero exactly when it vanishes, but built
        from the scaled state so it never underflows in deep tails.  Used as
        the root function for shooting.
        """
        y, yt, _nu = self.state_scaled(np.array([self.t_end]))
        h = math.hypot(y[0], yt[0])
        return float(y[0] / h) if h > 0 else 0.0

    @property
    def t(self):
        return np.array(self.raw[0])

    @property
    def r(self):
        return np.exp(self.t)

    @property
    def u(self):
        y, _ = self.state(self.t)
        with np.errstate(over="ignore"):
            return np.exp(-self.m * self.t) * y

    @property
    def du(self):
        _, z = self.state_yz(self.t)
        with np.errstate(over="ignore"):
            return np.exp(-(self.m + 1.0) * self.t) * z

    def u_at(self, r):
        t = np.log(np.asarray(r, dtype=float))
        y, _ = self.state(t)
        return np.exp(-self.m * t) * y

    def du_at(self, r):
        t = np.log(np.asarray(r, dtype=float))
        _, z = self.state_yz(t)
        return np.exp(-(self.m + 1.0) * t) * z


@dataclass
class IVPOptions:
    rtol: float | None = None
    r0: float | None = None
    max_nodes: int = -1
    tangency: float = TANGENCY
    log_y_cap: float = 60.0
    t_end: float | None = None
    max_steps: int = MAX_STEPS

    def resolved_rtol(self) -> float:
        return self.rtol if self.rtol is not None else default_rtol()


def _run(params: Params, start, t_end: float, opts: IVPOptions, cap=None) -> Trajectory:
    P = _pvec(params)
    rtol = opts.resolved_rtol()
    t0, w0, v0, tref, sig, mu = start
    if not t_end > t0:
        raise ValueError("end point must lie beyond the start point")
    raw = kern.integrate(float(t0), float(w0), float(v0), float(tref), float(sig), float(mu),
                         float(t_end), P, rtol, int(opts.max_nodes), float(opts.tangency),
                         float(opts.log_y_cap), int(opts.max_steps))
    reason = REASONS[int(raw[-1])]
    return Trajectory(params, rtol, raw[:-1], start, cap, reason)


def integrate_from_center(tau: float, sign: float, params: Params,
                          options: IVPOptions | None = None) -> Trajectory:
    opts = options or IVPOptions()
    r0 = opts.r0 if opts.r0 is not None else 1e-6 * params.radius
    start = _center_start(tau, sign, params, r0)
    t_end = opts.t_end if opts.t_end is not None else math.log(params.radius)
    cap = (tau, float(sign), start[0], start[1], start[5])
    return _run(params, start, t_end, opts, cap)


def integrate_from_node(t_lo: float, sign: float, log_slope: float, params: Params,
                        t_end: float, options: IVPOptions | None = None) -> Trajectory:
    opts = options or IVPOptions()
    start = _node_start(t_lo, sign, log_slope, _pvec(params))
    return _run(params, start, t_end, opts)


def integrate_ivp(a: float | None, params: Params, options: IVPOptions | None = None, *,
                  log_a: float | None = None, sign: float = 1.0) -> Trajectory:
    """Integrate from the centre value a (or sign * e^log_a) out to R."""
    if log_a is None:
        if a is None or a == 0 or not math.isfinite(a):
            raise ValueError("centre value must be finite and non-zero")
        log_a = math.log(abs(a))
        sign = math.copysign(1.0, a)
    tau = tau_from_log_a(log_a, params.dim)
    return integrate_from_center(tau, sign, params, options)


# ----------------------------------------------------------------------------
# nodes


def count_nodal_domains(traj, R: float | None = None, tangency: float = TANGENCY):
    """(number of nodal domains, interior node radii) of a trajectory.

    Works with kernel trajectories, whose zeros are located during the
    integration, and with any object exposing ``u_at``/``du_at`` (plus
    ``r_start`` and ``R``), which is scanned on 10^5 points and polished by
    bisection.
    """
    if isinstance(traj, Trajectory):
        if traj.termination_reason == "tangency":
            raise TangencyError("tangential zero encountered")
        if traj.termination_reason not in ("reached_R",):
            raise ShootingError(f"trajectory stopped early: {traj.termination_reason}")
        Rr = traj.params.radius if R is None else R
        tR = math.log(Rr)
        nt = traj.nodes_t[traj.nodes_t < tR]
        return nt.size + 1, np.exp(nt)
    Rr = traj.R if R is None else R
    r = np.linspace(getattr(traj, "r_start", 0.0), Rr, 100_001)[1:-1]
    u = np.asarray(traj.u_at(r))
    s = np.sign(u)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    roots = []
    for i in idx:
        z = brentq(traj.u_at, r[i], r[i + 1], xtol=1e-14, rtol=1e-15)
        du = abs(float(traj.du_at(z)))
        scale = max(np.abs(u[max(0, i - 50): i + 50]).max(), 1e-300)
        if du <= tangency * scale / max(Rr, 1e-300):
            raise TangencyError(f"tangential zero near r = {z}")
        roots.append(z)
    return len(roots) + 1, np.array(roots)


@dataclass
class SampledTrajectory:
    """A trajectory given by closed-form u and u' (for tests and checks)."""

    f: object
    df: object
    R: float
    r_start: float = 0.0

    def u_at(self, r):
        return self.f(r)

    def du_at(self, r):
        return self.df(r)


# ----------------------------------------------------------------------------
# packaging and residuals


def solution_grid(t_lo: float, breaks, t_hi: float, dim: int, width: float = 0.5,
                  order: int = 8, zero_at_lo: bool = False, grade: int = GRADE):
    """Log grid from t_lo to t_hi with panel edges at the given breaks.

    Panels are graded towards every zero of the solution (the breaks, t_hi
    and, for annuli, t_lo).
    """
    b = [t_lo] + [float(x) for x in breaks if t_lo < x < t_hi] + [t_hi]
    at = range(0 if zero_at_lo else 1, len(b))
    return log_grid(b, dim, order=order, width=width, grade=grade, grade_at=at)


def to_radialfn(traj: Trajectory, grid, t_lo: float | None = None,
                t_hi: float | None = None) -> RadialFn:
    """Sample a trajectory on a grid, zero outside [t_lo, t_hi]."""
    t = grid.t
    y = np.zeros_like(t)
    z = np.zeros_like(t)
    lo = -np.inf if t_lo is None else t_lo
    hi = np.inf if t_hi is None else t_hi
    inside = (t > lo) & (t < hi)
    if traj.cap is None:
        inside &= t >= traj.t_start
    yy, zz = traj.state_yz(t[inside])
    y[inside] = yy
    z[inside] = zz
    fn = RadialFn(grid, y, z)
    fn.meta["dense"] = traj
    fn.meta["t_range"] = (lo, hi)
    return fn


def _forcing(t, y, params: Params):
    """G(t, y) of the Emden-Fowler form y_tt = m^2 y - G."""
    m = params.m
    p = params.exponent
    out = np.zeros_like(y)
    nz = y != 0
    ly = np.log(np.abs(y[nz]))
    tt = t[nz]
    yy = y[nz]
    c = m * (params.pstar - p)
    with np.errstate(under="ignore", over="ignore"):
        out[nz] = np.sign(yy) * np.exp(c * tt + (p - 1.0) * ly) \
            + np.exp(2.0 * tt) * yy * (params.lam + params.theta * (2.0 * ly - 2.0 * m * tt))
    return out


def _diff_matrix(order: int):
    x, _ = np.polynomial.legendre.leggauss(order)
    D = np.zeros((order, order))
    wb = np.array([1.0 / np.prod([x[j] - x[k] for k in range(order) if k != j])
                   for j in range(order)])
    for i in range(order):
        for j in range(order):
            if i != j:
                D[i, j] = wb[j] / wb[i] / (x[i] - x[j])
        D[i, i] = -D[i].sum()
    return D


def ode_residual(u: RadialFn, params: Params, h: float = 1e-3,
                 min_step: float = 1e-6) -> float:
    """Max normalised residual of the equation in Emden-Fowler form.

    |y_tt - m^2 y + G| / (1 + |G| + m^2 |y| + |y_t|) over the abscissae, so
    the scale is that of the terms in the equation also at zeros of y.  With a
    dense trajectory attached (``u.meta['dense']``) y_tt is the centred
    (five-point) difference of the dense y_t, i.e. only the outer derivative
    is differenced; otherwise it comes from spectral differentiation of z on
    each panel.
    """
    g = u.grid
    m = params.m
    dense = u.meta.get("dense")
    lo, hi = u.meta.get("t_range", (-np.inf, np.inf))
    if u.is_zero():
        return 0.0
    if dense is not None:
        lo_ok = max(lo, dense.t_start if dense.cap is None else -np.inf)
        mask = (g.t > lo_ok) & (g.t < hi) & np.repeat(g.log_panel, g.order)
        t = g.t[mask]
        # u log u^2 makes y_ttt blow up logarithmically at a zero, so the
        # stencil must not straddle one: shrink it near zeros.
        zeros = np.concatenate(([lo, hi], np.asarray(u.meta.get("node_t", []), float)))
        zeros = zeros[np.isfinite(zeros)]
        dist = np.min(np.abs(t[:, None] - zeros[None, :]), axis=1) if zeros.size \
            else np.full(t.shape, np.inf)
        hh = np.minimum(h, dist / 20.0)
        keep = hh >= min_step
        t, hh = t[keep], hh[keep]
        y0, yt0, nu = dense.state_scaled(t)
        ds = []
        for k in (-2, -1, 1, 2):
            _, ytk, nuk = dense.state_scaled(t + k * hh)
            ds.append(ytk * np.exp(nuk - nu))
        ytt = (ds[0] - 8.0 * ds[1] + 8.0 * ds[2] - ds[3]) / (12.0 * hh)
        with np.errstate(under="ignore"):
            e = np.exp(nu)
            y = y0 * e
            yt = yt0 * e
            ytt = ytt * e
    else:
        D = _diff_matrix(g.order)
        t_all = g.t
        ytt_all = np.zeros_like(t_all)
        yt_all = np.zeros_like(t_all)
        mask = np.zeros(g.size, dtype=bool)
        for i, sl in enumerate(g.panel_slices()):
            if not g.log_panel[i]:
                continue
            width = g.log_edges[i + 1] - g.log_edges[i]
            zt = D @ u.z[sl] * (2.0 / width)
            yt = u.z[sl] + m * u.y[sl]
            ytt_all[sl] = zt + m * yt
            yt_all[sl] = yt
            mask[sl] = True
        mask &= (t_all > lo) & (t_all < hi)
        t = t_all[mask]
        y = u.y[mask]
        ytt = ytt_all[mask]
        yt = yt_all[mask]
    G = _forcing(t, y, params)
    scale = 1.0 + np.abs(G) + m * m * np.abs(y) + np.abs(yt)
    res = np.abs(ytt - m * m * y + G) / scale
    return float(res.max()) if res.size else 0.0


@dataclass
class ShootingResult:
    """A computed solution with its diagnostics."""

    params: Params
    solution: RadialFn
    sign: float
    log_a: float
    tau: float
    node_t: np.ndarray
    energy: float
    ode_residual: float
    nehari_residual_total: float
    nehari_residual_per_domain: list
    boundary_value: float
    scan: list = field(default_factory=list, repr=False)
    bands: list = field(default_factory=list, repr=False)
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def initial_value(self) -> float:
        """u(0); infinite when it exceeds the double range (see log_a)."""
        with np.errstate(over="ignore"):
            return self.sign * float(np.exp(self.log_a)) if self.log_a < 709.7 \
                else self.sign * math.inf

    @property
    def node_radii(self) -> np.ndarray:
        return np.exp(self.node_t)

    @property
    def nodal_domains(self) -> int:
        return self.node_t.size + 1

    def summary(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "k": self.nodal_domains,
            "sign": int(self.sign),
            "log_abs_u0": self.log_a,
            "u0": self.initial_value if math.isfinite(self.initial_value) else None,
            "node_log_radii": [float(x) for x in self.node_t],
            "node_radii": [float(x) for x in self.node_radii],
            "energy": self.energy,
            "ode_residual": self.ode_residual,
            "nehari_residual_total": self.nehari_residual_total,
            "nehari_residual_per_domain": list(self.nehari_residual_per_domain),
            "boundary_value": self.boundary_value,
        }


def domain_masks(grid, node_t, t_lo=-np.inf, t_hi=np.inf):
    edges = [t_lo] + list(node_t) + [t_hi]
    return [(grid.t > a) & (grid.t < b) for a, b in zip(edges[:-1], edges[1:])]


def package(params: Params, traj: Trajectory, node_t, t_hi: float | None = None,
            width: float = 0.5) -> RadialFn:
    """Ball solution on [0, e^t_hi] as a RadialFn with nodes as panel edges."""
    t_hi = math.log(params.radius) if t_hi is None else t_hi
    t_lo = traj.t_start
    grid = solution_grid(t_lo, node_t, t_hi, params.dim, width=width)
    fn = to_radialfn(traj, grid, None, t_hi)
    fn.meta["node_t"] = np.asarray(node_t, dtype=float)
    return fn


def diagnostics(fn: RadialFn, params: Params, node_t):
    """(energy, ode residual, total and per-domain relative Nehari residuals)."""
    E = energy(fn, params)
    res = ode_residual(fn, params)
    I_tot = relative_nehari_residual(fn, params)
    per = []
    for mask in domain_masks(fn.grid, node_t):
        per.append(relative_nehari_residual(fn.masked(mask), params))
    return E, res, I_tot, per


# ----------------------------------------------------------------------------
# shooting


@dataclass
class ShootOptions:
    rtol: float | None = None
    log_a_min: float = math.log(1e-3)
    log_a_max: float = 2.0e4
    fine_step: float = 0.25
    coarse_ratio: float = 1.05
    switch_tau: float = -10.0
    max_retries: int = 5
    select: str = "least_energy"


def _scan_taus(params: Params, opts: ShootOptions):
    N = params.dim
    t_hi = tau_from_log_a(opts.log_a_min, N)
    t_lo = tau_from_log_a(opts.log_a_max, N)
    taus = []
    t = t_hi
    while t > max(opts.switch_tau, t_lo):
        taus.append(t)
        t -= opts.fine_step
    t = min(t, opts.switch_tau)
    while t > t_lo:
        taus.append(t)
        t *= opts.coarse_ratio
    taus.append(t_lo)
    return np.array(taus)


def _probe(tau, sign, params, rtol, max_nodes):
    opts = IVPOptions(rtol=rtol, max_nodes=max_nodes)
    tr = integrate_from_center(tau, sign, params, opts)
    tR = math.log(params.radius)
    inner = int(np.sum(tr.nodes_t < tR))
    yR = tr.y_end() if tr.termination_reason == "reached_R" else math.nan
    return tr, inner, yR


_SCAN_CACHE: dict = {}


def scan_table(params: Params, sign: float, k_needed: int, opts: ShootOptions):
    """List of (tau, log_a, interior zeros, y(R), reason) over the scan.

    Runs stop after k_needed + 1 zeros, which keeps deep probes cheap.  Where
    the zero count jumps by more than one between neighbours the spacing is
    halved locally.
    """
    rtol = opts.rtol if opts.rtol is not None else default_rtol()
    key = (params, float(sign), rtol, opts.log_a_min, opts.log_a_max, opts.fine_step,
           opts.coarse_ratio, opts.switch_tau)
    cached = _SCAN_CACHE.get(key)
    if cached is not None and cached[0] >= k_needed:
        return cached[1]
    rows = []
    for tau in _scan_taus(params, opts):
        tr, n, yR = _probe(tau, sign, params, rtol, k_needed + 1)
        rows.append((float(tau), log_a_from_tau(tau, params.dim), n, yR, tr.termination_reason))
    # refine anomalies
    for _ in range(8):
        new = []
        for a, b in zip(rows[:-1], rows[1:]):
            if abs(b[2] - a[2]) > 1 and abs(a[0] - b[0]) > 1e-6:
                tau = 0.5 * (a[0] + b[0])
                tr, n, yR = _probe(tau, sign, params, rtol, k_needed + 1)
                new.append((tau, log_a_from_tau(tau, params.dim), n, yR, tr.termination_reason))
        if not new:
            break
        rows = sorted(rows + new, key=lambda r: -r[0])
    _SCAN_CACHE[key] = (k_needed, rows)
    return rows


def _bisect_band(params, sign, k, tau_a, tau_b, rtol):
    """Root of y(R) between tau_a (k-1 zeros) and tau_b (k zeros)."""
    def g(tau):
        tr = integrate_from_center(tau, sign, params, IVPOptions(rtol=rtol))
        if tr.termination_reason != "reached_R":
            raise ShootingError(f"probe stopped early: {tr.termination_reason}")
        return tr.end_phase()

    ga, gb = g(tau_a), g(tau_b)
    if ga == 0:
        return tau_a
    if gb == 0:
        return tau_b
    if np.sign(ga) == np.sign(gb):
        raise ShootingError("band endpoints do not bracket u(R) = 0")
    return brentq(g, tau_b, tau_a, xtol=1e-15 * max(1.0, abs(tau_a)), rtol=1e-15, maxiter=400)


def _finish(params, sign, k, tau, rtol, scan, bands) -> ShootingResult:
    tR = math.log(params.radius)
    tr = integrate_from_center(tau, sign, params, IVPOptions(rtol=rtol))
    if tr.termination_reason == "tangency":
        raise TangencyError("tangential zero at the solution", scan)
    if tr.termination_reason != "reached_R":
        raise ShootingError(f"final run stopped early: {tr.termination_reason}", scan)
    nt = tr.nodes_t[tr.nodes_t < tR - 1e-12]
    if nt.size != k - 1:
        raise ShootingError(f"expected {k - 1} interior zeros, found {nt.size}", scan)
    fn = package(params, tr, nt)
    E, res, G, per = diagnostics(fn, params, nt)
    yR = tr.y_end()
    return ShootingResult(params, fn, float(sign), log_a_from_tau(tau, params.dim), tau, nt,
                          E, res, G, per, yR * params.radius ** (-params.m), scan, bands, tr)


def shoot_k(params: Params, k: int, sign: float = 1.0,
            options: ShootOptions | None = None) -> ShootingResult:
    """Radial solution with exactly k nodal domains and sign(u(0)) = sign.

    Scans tau (equivalently log|u(0)|), brackets every transition from k-1
    to k interior zeros, bisects each on u(R) and returns the least-energy
    solution found.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    sign = 1.0 if sign > 0 else -1.0
    opts = options or ShootOptions()
    rtol = opts.rtol if opts.rtol is not None else default_rtol()
    rows = scan_table(params, sign, k, opts)
    brackets = []
    for a, b in zip(rows[:-1], rows[1:]):
        if a[4] == "reached_R" and a[2] == k - 1 and b[2] >= k:
            brackets.append((a[0], b[0]))
    if not brackets:
        raise ShootingError(
            f"no parameter with {k} nodal domains in log|u(0)| <= {opts.log_a_max:g}", rows)
    results = []
    errors = []
    for tau_a, tau_b in brackets:
        for attempt in range(opts.max_retries + 1):
            try:
                tau = _bisect_band(params, sign, k, tau_a, tau_b, rtol)
                results.append(_finish(params, sign, k, tau, rtol, rows, brackets))
                break
            except TangencyError as exc:
                errors.append(str(exc))
                shift = 1e-6 * (attempt + 1) * (tau_a - tau_b)
                tau_a, tau_b = tau_a - shift, tau_b + shift
            except ShootingError as exc:
                errors.append(str(exc))
                break
    if not results:
        raise ShootingError("all brackets failed: " + "; ".join(errors), rows)
    if opts.select == "least_energy":
        return min(results, key=lambda r: r.energy)
    return results[0]
