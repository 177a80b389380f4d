"""Nodal solutions by gluing positive solutions on a ball and annuli.

Each nodal domain carries a positive least-energy solution of the
Dirichlet problem on its own ball or annulus; the pieces are put together
with alternating signs.  The node positions are then moved until the
one-sided derivatives agree.  For the energy E(t_1, ..., t_{k-1}) of the
glued function (t_j = log r_j) the domain-variation formula gives

    dE/dt_j = (omega / 2) (z_right(t_j)^2 - z_left(t_j)^2),

where z = r^{N/2} u' is the flux of the piece to the left or right of the
node and omega the sphere area.  A zero of this derivative is exactly the
matching condition, so the minimiser is located by root finding on the log
ratio of the two fluxes instead of by direct search; the energy landscape is
far too flat for the latter when nodes sit at r ~ 1e-25.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from . import shoot
from .model import Params, RadialFn, energy
from .quadrature import sphere_area

XTOL = 1e-13
CONDITION_TOL = 1e-6
END_TOL = 1e-9    # a zero this close to the outer end is the end itself


class GlueError(RuntimeError):
    """A piece could not be solved or the node optimisation stalled."""

    def __init__(self, msg, data=None):
        super().__init__(msg)
        self.data = data


@dataclass
class Piece:
    """Positive solution of the Dirichlet problem on {t_lo < log r < t_hi}.

    ``t_lo`` is -inf for the central ball.  ``shape`` is the shooting
    parameter (tau for the ball, the log initial slope for an annulus).
    Fluxes are stored as logs since they range over hundreds of orders of
    magnitude.
    """

    params: Params
    traj: shoot.Trajectory
    t_lo: float
    t_hi: float
    shape: float
    log_flux_in: float
    log_flux_out: float
    _energy: float | None = field(default=None, repr=False)

    @property
    def is_ball(self) -> bool:
        return not math.isfinite(self.t_lo)

    def grid(self):
        lo = self.traj.t_start if self.is_ball else self.t_lo
        return shoot.solution_grid(lo, [], self.t_hi, self.params.dim,
                                   zero_at_lo=not self.is_ball)

    def radialfn(self, grid=None) -> RadialFn:
        g = self.grid() if grid is None else grid
        fn = shoot.to_radialfn(self.traj, g, None if self.is_ball else self.t_lo, self.t_hi)
        fn.meta["piece"] = self
        return fn

    @property
    def energy(self) -> float:
        if self._energy is None:
            self._energy = energy(self.radialfn(), self.params)
        return self._energy

    def end_value_relative(self) -> float:
        """|u| at the outer end over max |u| on the piece."""
        fn = self.radialfn()
        la = fn.log_abs_values
        la = la[np.isfinite(la)]
        ly = _log_abs_at(self.traj, self.t_hi, 0)
        return float(np.exp(ly - self.params.m * self.t_hi - la.max()))


def _rtol(rtol):
    return rtol if rtol is not None else shoot.default_rtol()


def _y_end(traj):
    if traj.termination_reason not in ("reached_R", "node_limit"):
        raise GlueError(f"piece integration stopped: {traj.termination_reason}")
    return traj.end_phase()


def _log_abs_at(traj, t, which):
    # log|y| (which=0) or log|y_t| (which=1) from the scaled state, so deep
    # tails do not underflow
    st = traj.state_scaled(np.array([t]))
    v = st[which][0]
    return math.log(abs(v)) + st[-1][0] if v != 0 else -math.inf


def _tighten(lo, hi, count, g, max_iter=200):
    """Shrink [lo, hi] until hi has exactly one zero and g changes sign.

    ``count(x)`` is the number of interior zeros for parameter x (lo must
    have none).  Any odd count at hi also flips the sign of g, but then the
    bracket holds several roots, so bisect on the count until it is one.
    """
    glo = g(lo)
    for _ in range(max_iter):
        if count(hi) == 1:
            try:
                ghi = g(hi)
            except GlueError:
                ghi = math.nan
            if np.isfinite(ghi) and np.sign(ghi) != np.sign(glo):
                return lo, hi
        mid = 0.5 * (lo + hi)
        if count(mid) == 0:
            lo, glo = mid, g(mid)
        else:
            hi = mid
    raise GlueError("could not bracket the positive solution")


def ball_piece(params: Params, t_hi: float, rtol: float | None = None,
               max_expand: int = 40) -> Piece:
    """Positive solution on the ball {log r < t_hi} by shooting in tau."""
    rtol = _rtol(rtol)
    opts = shoot.IVPOptions(rtol=rtol, t_end=t_hi, max_nodes=2)

    def run(tau):
        return shoot.integrate_from_center(tau, 1.0, params, opts)

    def zeros(tr):
        return int(np.sum(tr.nodes_t < t_hi - END_TOL))

    hi = t_hi + 8.0
    tr = run(hi)
    if zeros(tr):
        raise GlueError("ball solution has a zero even at small amplitude")
    step = 0.5
    lo = None
    for _ in range(max_expand):
        cand = hi - step
        tr = run(cand)
        if zeros(tr):
            lo = cand
            break
        hi = cand
        step *= 2.0
    if lo is None:
        raise GlueError("no positive ball solution bracketed", {"t_hi": t_hi})

    def g(tau):
        tr = shoot.integrate_from_center(tau, 1.0, params,
                                         shoot.IVPOptions(rtol=rtol, t_end=t_hi))
        return _y_end(tr)

    # here the parameter decreases towards more zeros, so swap roles
    hi, lo = _tighten(hi, lo, lambda x: zeros(run(x)), g)
    tau = brentq(g, lo, hi, xtol=XTOL * max(1.0, abs(lo)), rtol=1e-15, maxiter=400)
    tr = shoot.integrate_from_center(tau, 1.0, params, shoot.IVPOptions(rtol=rtol, t_end=t_hi))
    if zeros(tr) or tr.termination_reason != "reached_R":
        raise GlueError("ball solution is not positive")
    return Piece(params, tr, -math.inf, t_hi, tau, math.nan, _log_abs_at(tr, t_hi, 1))


def _log_slope_for_centre(tc, t_lo, params):
    # slope at t_lo of the bubble K sech^m(t - tc): ~ 2^m m K e^{-m (tc - t_lo)}
    m = params.m
    K = (params.dim * (params.dim - 2.0) / 4.0) ** (m / 2.0)
    s = t_lo - tc
    lY, th = shoot.kern.log_bubble(s, m, K)
    return lY + math.log(m * abs(th))


def annulus_piece(params: Params, t_lo: float, t_hi: float, rtol: float | None = None,
                  max_expand: int = 60) -> Piece:
    """Positive solution on {t_lo < log r < t_hi}, zero at both ends.

    Shoots from the inner end in the log of the initial slope.  The search
    starts from the slope of a bubble centred beyond t_hi (no interior zero)
    and steepens until a zero appears.
    """
    if not t_hi > t_lo:
        raise ValueError("annulus must have t_lo < t_hi")
    rtol = _rtol(rtol)

    def run(lb, max_nodes=2):
        return shoot.integrate_from_node(t_lo, 1.0, lb, params, t_hi,
                                         shoot.IVPOptions(rtol=rtol, max_nodes=max_nodes))

    def zeros(tr):
        return int(np.sum((tr.nodes_t > t_lo) & (tr.nodes_t < t_hi - END_TOL)))

    lo = _log_slope_for_centre(t_hi + 8.0, t_lo, params)
    tr = run(lo)
    if zeros(tr):
        raise GlueError("annulus solution has a zero even at small amplitude")
    hi = None
    step = 0.5
    for _ in range(max_expand):
        cand = lo + step
        tr = run(cand)
        if zeros(tr) or tr.termination_reason == "blow_up":
            hi = cand
            break
        lo = cand
        step *= 2.0
    if hi is None:
        raise GlueError("no positive annulus solution bracketed (annulus too thin?)",
                        {"t_lo": t_lo, "t_hi": t_hi})

    def g(lb):
        return _y_end(run(lb, -1))

    def count(x):
        tr = run(x)
        return 2 if tr.termination_reason == "blow_up" else zeros(tr)

    lo, hi = _tighten(lo, hi, count, g)
    lb = brentq(g, lo, hi, xtol=XTOL * max(1.0, abs(lo)), rtol=1e-15, maxiter=400)
    tr = run(lb, -1)
    if zeros(tr) or tr.termination_reason != "reached_R":
        raise GlueError("annulus solution is not positive")
    lout = _log_abs_at(tr, t_hi, 1)
    # Shooting from a zero excites the decaying mode; once the bump has
    # decayed for a long stretch before t_hi its rounding errors are
    # amplified like e^{2m(t - t_peak)}.  Re-solve with a tighter tolerance
    # and refuse the piece if the outer flux moves.
    check = shoot.integrate_from_node(
        t_lo, 1.0, lb, params, t_hi,
        shoot.IVPOptions(rtol=max(rtol * 1e-2, 1e-15), max_nodes=-1))
    if zeros(check) or not abs(_log_abs_at(check, t_hi, 1) - lout) <= CONDITION_TOL:
        raise GlueError("annulus shooting is ill-conditioned", {"t_lo": t_lo, "t_hi": t_hi})
    return Piece(params, tr, t_lo, t_hi, lb, lb, lout)


def annulus_positive_solution(params: Params, r_lo: float | None = None,
                              r_hi: float | None = None, *, t_lo: float | None = None,
                              t_hi: float | None = None, rtol: float | None = None) -> RadialFn:
    """Positive solution on the annulus [r_lo, r_hi] (ball when r_lo = 0).

    Radii may alternatively be given as logs (``t_lo``, ``t_hi``), which is
    needed once they fall below the double range.
    """
    if t_lo is None:
        if r_lo is None or r_lo < 0:
            raise ValueError("inner radius must be >= 0")
        t_lo = -math.inf if r_lo == 0 else math.log(r_lo)
    if t_hi is None:
        if r_hi is None:
            raise ValueError("outer radius required")
        t_hi = math.log(r_hi)
    if t_hi > math.log(params.radius) + 1e-14:
        raise ValueError("annulus must lie inside the ball")
    if math.isfinite(t_lo):
        piece = annulus_piece(params, t_lo, t_hi, rtol)
    else:
        piece = ball_piece(params, t_hi, rtol)
    return piece.radialfn()


# ----------------------------------------------------------------------------
# assembly


@dataclass
class GluedSolution:
    """Alternating-sign concatenation of per-domain positive solutions.

    ``mismatches`` follow the r-form |u'(r_j+) - u'(r_j-)| (infinite when it
    overflows); ``log_mismatches`` hold their logs and
    ``relative_mismatches`` the scale-free |z+ - z-| / max(|z+|, |z-|).
    """

    params: Params
    pieces: list
    node_t: np.ndarray
    leading_sign: float
    solution: RadialFn
    components: list
    total_energy: float
    log_mismatches: np.ndarray
    relative_mismatches: np.ndarray
    log_max_du: float
    converged: bool = True
    history: list = field(default_factory=list, repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return np.exp(self.node_t)

    @property
    def mismatches(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_mismatches)

    @property
    def k(self) -> int:
        return len(self.pieces)

    def mismatch_ratio(self) -> np.ndarray:
        """|u'(r_j+) - u'(r_j-)| / max |u'|."""
        return np.exp(self.log_mismatches - self.log_max_du)


def assemble_glued(pieces, leading_sign: float = 1.0, grid=None) -> RadialFn:
    """(-1)^{j-1} leading_sign * piece_j on one grid with the nodes as edges."""
    pieces = list(pieces)
    if not pieces:
        raise ValueError("need at least one piece")
    if not pieces[0].is_ball:
        raise ValueError("first piece must be the central ball")
    for a, b in zip(pieces[:-1], pieces[1:]):
        if abs(a.t_hi - b.t_lo) > 1e-9 * max(1.0, abs(a.t_hi)):
            raise ValueError("pieces do not match at a node")
    params = pieces[0].params
    node_t = [p.t_hi for p in pieces[:-1]]
    if grid is None:
        grid = shoot.solution_grid(pieces[0].traj.t_start, node_t, pieces[-1].t_hi,
                                   params.dim)
    comps = [p.radialfn(grid) for p in pieces]
    y = np.zeros(grid.size)
    z = np.zeros(grid.size)
    s = 1.0 if leading_sign > 0 else -1.0
    for c in comps:
        y += s * c.y
        z += s * c.z
        s = -s
    fn = RadialFn(grid, y, z)
    fn.meta["node_t"] = np.array(node_t)
    fn.meta["components"] = comps
    return fn


def _log_mismatch(piece_l, piece_r, m):
    a, b = piece_l.log_flux_out, piece_r.log_flux_in
    hi = max(a, b)
    # |e^a - e^b| = e^hi (1 - e^{-|a-b|})
    d = abs(a - b)
    rel = -math.expm1(-d)
    return (hi + math.log(rel) if rel > 0 else -math.inf), rel


def glue(pieces, leading_sign: float = 1.0, converged: bool = True, history=None) -> GluedSolution:
    pieces = list(pieces)
    params = pieces[0].params
    m = params.m
    fn = assemble_glued(pieces, leading_sign)
    comps = fn.meta["components"]
    total = sum(energy(c, params) for c in comps)
    node_t = np.array([p.t_hi for p in pieces[:-1]])
    logs, rels = [], []
    for pl, pr, t in zip(pieces[:-1], pieces[1:], node_t):
        lz, rel = _log_mismatch(pl, pr, m)
        logs.append(lz - (m + 1.0) * t)
        rels.append(rel)
    with np.errstate(divide="ignore"):
        ldu = np.log(np.abs(fn.z)) - (m + 1.0) * fn.grid.t
    # one-sided flux values at the nodes are part of max |u'|
    cand = [ldu.max()] + [max(pl.log_flux_out, pr.log_flux_in) - (m + 1.0) * t
                          for pl, pr, t in zip(pieces[:-1], pieces[1:], node_t)]
    return GluedSolution(params, pieces, node_t, leading_sign, fn, comps, total,
                         np.array(logs), np.array(rels), float(max(cand)), converged,
                         history or [])


def derivative_mismatch(glued: GluedSolution) -> np.ndarray:
    """|u'(r_j+) - u'(r_j-)| at each interior node (r units, may be inf)."""
    return glued.mismatches


# ----------------------------------------------------------------------------
# node optimisation


def pieces_for(params: Params, node_t, rtol=None):
    """Solve every piece for the given log-node positions."""
    tR = math.log(params.radius)
    edges = [-math.inf] + list(node_t) + [tR]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if math.isfinite(lo):
            out.append(annulus_piece(params, lo, hi, rtol))
        else:
            out.append(ball_piece(params, hi, rtol))
    return out


def flux_log_ratio(params: Params, t: float, t_left: float, t_right: float, rtol=None):
    """log|z_left| - log|z_right| at a node t between t_left and t_right.

    Positive when the left piece is steeper, i.e. when moving the node
    outwards lowers the energy.
    """
    left = ball_piece(params, t, rtol) if not math.isfinite(t_left) \
        else annulus_piece(params, t_left, t, rtol)
    right = annulus_piece(params, t, t_right, rtol)
    return left.log_flux_out - right.log_flux_in, left, right


def _phi(params, t, t_left, t_right, rtol):
    return flux_log_ratio(params, t, t_left, t_right, rtol)[0]


def _solve_node(params, t0, t_left, t_right, rtol, t_floor, deadline):
    """Zero of the flux ratio for one node with its neighbours held fixed.

    Returns (t, ok); ok is False when the zero was not bracketed above
    ``t_floor``, a piece failed, or the deadline passed.
    """
    gap = 1e-3
    lo_lim = max(t_left + gap, t_floor) if math.isfinite(t_left) else t_floor
    hi_lim = t_right - gap
    t0 = min(max(t0, lo_lim), hi_lim)
    f = lambda t: _phi(params, t, t_left, t_right, rtol)
    try:
        f0 = f(t0)
        if f0 == 0:
            return t0, True
        # phi > 0: the left piece is steeper, the node should move outwards
        direction = 1.0 if f0 > 0 else -1.0
        step = 0.25
        a, fa = t0, f0
        while True:
            if deadline is not None and time.monotonic() > deadline:
                return a, False
            b = a + direction * step
            at_limit = b >= hi_lim or b <= lo_lim
            if at_limit:
                b = hi_lim if direction > 0 else lo_lim
            try:
                fb = f(b)
            except GlueError:
                # the pieces broke down somewhere past b; approach more slowly
                if step < 1e-3:
                    return a, False
                step *= 0.25
                continue
            if np.sign(fb) != np.sign(fa):
                break
            if at_limit:
                return b, False
            a, fa = b, fb
            step *= 2.0
        lo, hi = min(a, b), max(a, b)
        return brentq(f, lo, hi, xtol=XTOL * max(1.0, abs(lo)), rtol=1e-15, maxiter=200), True
    except GlueError:
        return t0, False


def optimize_nodes(params: Params, k: int, init_nodes=None, *, init_log_nodes=None,
                   method: str = "flux", leading_sign: float = 1.0, rtol: float | None = None,
                   t_floor: float = -2000.0, time_budget: float | None = None,
                   tol: float = 1e-10, max_sweeps: int = 50) -> GluedSolution:
    """Node positions minimising the glued energy for k nodal domains.

    method="flux" (default) solves dE/dt_j = 0 node by node (Gauss-Seidel
    sweeps; a single root for k = 2).  method="nelder-mead" runs
    scipy's simplex search on the energy in log-node coordinates.

    Initial nodes default to the equal-volume partition r_j = R (j/k)^{1/N}.
    The optimisation gives up (``converged=False``) when a node would have to
    move below ``t_floor`` or the time budget runs out.
    """
    if k < 2:
        raise ValueError("node optimisation needs k >= 2")
    rtol = _rtol(rtol)
    tR = math.log(params.radius)
    if init_log_nodes is not None:
        t = np.array(init_log_nodes, dtype=float)
    elif init_nodes is not None:
        r = np.asarray(init_nodes, dtype=float)
        if np.any(r <= 0) or np.any(r >= params.radius):
            raise ValueError("initial nodes must lie in (0, R)")
        t = np.log(r)
    else:
        t = tR + np.log(np.arange(1, k) / k) / params.dim
    if t.size != k - 1 or np.any(np.diff(t) <= 0):
        raise ValueError("need k-1 strictly increasing initial nodes")
    deadline = None if time_budget is None else time.monotonic() + time_budget
    history = []

    if method == "nelder-mead":
        def obj(x):
            xs = np.sort(x)
            if np.any(np.diff(np.concatenate((xs, [tR]))) < 1e-3):
                return 1e300
            try:
                return sum(p.energy for p in pieces_for(params, xs, rtol))
            except GlueError:
                return 1e300
        res = minimize(obj, t, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 400 * k})
        t = np.sort(res.x)
        history.append({"nelder_mead": res.message, "nfev": res.nfev})
        g = glue(pieces_for(params, t, rtol), leading_sign, bool(res.success), history)
        return g

    if method != "flux":
        raise ValueError(f"unknown method {method!r}")
    converged = False
    for sweep in range(max_sweeps):
        old = t.copy()
        ok_all = True
        for j in range(k - 1):
            left = t[j - 1] if j > 0 else -math.inf
            right = t[j + 1] if j + 1 < k - 1 else tR
            tj, ok = _solve_node(params, t[j], left, right, rtol, t_floor, deadline)
            t[j] = tj
            ok_all &= ok
        history.append({"sweep": sweep, "log_nodes": t.tolist()})
        if not ok_all:
            break
        if k == 2 or np.max(np.abs(t - old)) < tol * max(1.0, np.max(np.abs(t))):
            converged = True
            break
        if deadline is not None and time.monotonic() > deadline:
            break
    return glue(pieces_for(params, t, rtol), leading_sign, converged, history)


def hadamard_derivative(params: Params, t: float, t_left: float, t_right: float,
                        rtol=None) -> float:
    """dE/dt at a node, (omega/2)(z_right^2 - z_left^2)."""
    _, left, right = flux_log_ratio(params, t, t_left, t_right, rtol)
    om = sphere_area(params.dim)
    return 0.5 * om * (math.exp(2 * right.log_flux_in) - math.exp(2 * left.log_flux_out))
