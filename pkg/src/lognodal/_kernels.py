"""Compiled kernels for the radial ODE in Emden-Fowler variables.

With t = log r and y = r^m u (m = (N-2)/2) the radial equation
-u'' - (N-1)/r u' = f(u) becomes

    y_tt = m^2 y - G(t, y),
    G(t, y) = |y|^{2*-2} y + (e^{c t} |y|^{p-2} y - |y|^{2*-2} y)
              + lam e^{2t} y + theta e^{2t} y (log y^2 - 2 m t),

with c = m (2* - p).  The critical part is scale invariant and has the exact
homoclinic K sech^m(t - tau), the Aubin-Talenti bubble.

Two devices keep this usable for bubble towers, whose amplitudes span
thousands of orders of magnitude:

* the state is the deviation w = y - sig * K sech^m(t - tref) from a
  reference bubble, re-anchored at every zero of y, so the part of y that
  is exactly a bubble never has to be integrated;
* the bubble is evaluated in log form and the deviation is stored in units
  of e^mu, with a log scale mu that is moved whenever w drifts too far from
  order one.  So y = sig * Y(t - tref) + e^mu * w.

Parameter vector layout (``P``): N, m, p, pstar, lam, theta, c, K.
"""

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS], dtype=np.float64)
_B = np.ascontiguousarray(_dop.B, dtype=np.float64)
_C = np.ascontiguousarray(_dop.C[:_NS], dtype=np.float64)
_E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
_E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)

TERM_REACHED = 0
TERM_NODE_LIMIT = 1
TERM_STEP_FAILURE = 2
TERM_BLOW_UP = 3
TERM_TANGENCY = 4

# rescale once the scaled state leaves [e^-RESCALE, e^RESCALE]
RESCALE = 40.0


def param_vector(dim, lam, theta, p):
    m = 0.5 * (dim - 2.0)
    pstar = 2.0 * dim / (dim - 2.0)
    K = (dim * (dim - 2.0) / 4.0) ** (m / 2.0)
    return np.array([dim, m, p, pstar, lam, theta, m * (pstar - p), K], dtype=np.float64)


@njit(cache=True)
def log_bubble(s, m, K):
    """log(K sech^m(s)) and tanh(s)."""
    a = abs(s)
    e = math.exp(-2.0 * a)
    th = (1.0 - e) / (1.0 + e)
    if s < 0.0:
        th = -th
    return math.log(K) + m * (math.log(2.0) - a - math.log1p(e)), th


@njit(cache=True)
def _phi(q, e):
    """((1 + q)^e - 1) / q, continuous at q = 0."""
    if abs(q) < 1e-8:
        return e * (1.0 + 0.5 * (e - 1.0) * q)
    return math.expm1(e * math.log1p(q)) / q


@njit(cache=True)
def accel(t, w, tref, sig, mu, P):
    """w_tt in units of e^mu, for y = sig*Y(t - tref) + e^mu * w."""
    m = P[1]
    pstar = P[3]
    lY, _th = log_bubble(t - tref, m, P[7])
    d = lY - mu
    # q = (e^mu w) / (sig Y): relative size of the deviation
    if d > -700.0:
        q = sig * w * math.exp(-d)
    else:
        q = math.inf
    if q > -0.5 and q < 1e300:
        dcrit = math.exp((pstar - 2.0) * lY) * w * _phi(q, pstar - 1.0)
        ly = lY + math.log1p(q)
        ysgn = sig
        if d < 700.0:
            yhat = sig * math.exp(d) + w
        else:
            yhat = math.inf
    else:
        yhat = sig * math.exp(d) + w
        dcrit = 0.0
        if yhat != 0.0:
            dcrit = yhat * math.exp((pstar - 2.0) * (math.log(abs(yhat)) + mu))
        dcrit -= sig * math.exp(d + (pstar - 2.0) * lY)
        ysgn = 1.0 if yhat > 0.0 else -1.0
        ly = math.log(abs(yhat)) + mu if yhat != 0.0 else -math.inf
    pert = 0.0
    if math.isfinite(ly):
        # each forcing term is coef * y; y / e^mu = ysgn * exp(ly - mu)
        base = ly - mu
        if P[6] != 0.0 and (pstar - P[2]) * ly > P[6] * t:
            # subcritical with |y|^{2*-2} above e^{ct}|y|^{p-2}: adding the
            # critical power and taking it away again would cancel, so use
            # e^{ct}|y|^{p-2}y - sig Y^{2*-1} directly
            l1 = P[6] * t + (P[2] - 1.0) * ly - mu
            l2 = (pstar - 1.0) * lY - mu
            dcrit = ysgn * math.exp(min(l1, 700.0)) - sig * math.exp(min(l2, 700.0))
        elif P[6] != 0.0:
            # e^{ct}|y|^{p-2}y - |y|^{2*-2}y = |y|^{p-2}y e^B expm1(A - B)
            # with A = ct, B = (2*-p) log|y|; no cancellation when both are
            # far below zero
            ea = P[6] * t
            eb = (pstar - P[2]) * ly
            c = math.expm1(ea - eb)
            if c != 0.0:
                lc = (P[2] - 2.0) * ly + eb + math.log(abs(c)) + base
                pert += (1.0 if c > 0.0 else -1.0) * math.exp(min(lc, 700.0))
        c = P[4] + P[5] * (2.0 * ly - 2.0 * m * t)
        if c != 0.0:
            lc = 2.0 * t + math.log(abs(c)) + base
            pert += (1.0 if c > 0.0 else -1.0) * math.exp(min(lc, 700.0))
        pert *= ysgn
    return m * m * w - dcrit - pert


@njit(cache=True)
def dop853_step(t, w, v, h, tref, sig, mu, P, rtol, aw, av):
    """One DOP853 step for (w, w_t); returns (w1, v1, error_norm)."""
    Kw = np.empty(_NS + 1)
    Kv = np.empty(_NS + 1)
    Kw[0] = v
    Kv[0] = accel(t, w, tref, sig, mu, P)
    for s in range(1, _NS):
        dw = 0.0
        dv = 0.0
        for j in range(s):
            dw += _A[s, j] * Kw[j]
            dv += _A[s, j] * Kv[j]
        Kw[s] = v + h * dv
        Kv[s] = accel(t + _C[s] * h, w + h * dw, tref, sig, mu, P)
    sw = 0.0
    sv = 0.0
    for j in range(_NS):
        sw += _B[j] * Kw[j]
        sv += _B[j] * Kv[j]
    w1 = w + h * sw
    v1 = v + h * sv
    Kw[_NS] = v1
    Kv[_NS] = accel(t + h, w1, tref, sig, mu, P)
    e5w = 0.0
    e5v = 0.0
    e3w = 0.0
    e3v = 0.0
    for j in range(_NS + 1):
        e5w += _E5[j] * Kw[j]
        e5v += _E5[j] * Kv[j]
        e3w += _E3[j] * Kw[j]
        e3v += _E3[j] * Kv[j]
    scw = aw + rtol * max(abs(w), abs(w1))
    scv = av + rtol * max(abs(v), abs(v1))
    n5 = (e5w / scw) ** 2 + (e5v / scv) ** 2
    n3 = (e3w / scw) ** 2 + (e3v / scv) ** 2
    if n5 == 0.0 and n3 == 0.0:
        return w1, v1, 0.0
    err = abs(h) * n5 / math.sqrt((n5 + 0.01 * n3) * 2.0)
    return w1, v1, err


@njit(cache=True)
def y_of(t, w, v, tref, sig, mu, P):
    """(y, y_t) in units of e^nu, returned with nu = max(mu, log Y)."""
    m = P[1]
    lY, th = log_bubble(t - tref, m, P[7])
    nu = max(mu, lY)
    Y = math.exp(lY - nu)
    f = math.exp(mu - nu)
    return sig * Y + f * w, -sig * m * th * Y + f * v, nu


@njit(cache=True)
def z_of(t, w, v, tref, sig, mu, P):
    """z = y_t - m y in the units of y_of, without cancellation where
    y_t is close to m y (on the rising flank of the bubble)."""
    m = P[1]
    s = t - tref
    lY, _th = log_bubble(s, m, P[7])
    nu = max(mu, lY)
    Y = math.exp(lY - nu)
    f = math.exp(mu - nu)
    e = math.exp(-2.0 * abs(s))
    # 1 + tanh(s)
    one_th = 2.0 * e / (1.0 + e) if s < 0.0 else 2.0 / (1.0 + e)
    return -sig * m * one_th * Y + f * (v - m * w)


@njit(cache=True)
def rereference(t, b, lb, P):
    """Reference bubble through a zero of y with slope sign b and log|y_t| = lb.

    Returns (tref, sig, w, w_t, mu) with the deviation in units of e^mu,
    mu = lb.  Near the saddle y = 0 the unstable branch of the homoclinic
    satisfies y_t = m y, so matching (y + y_t/m)/2 leaves only a decaying
    remainder in w.
    """
    m = P[1]
    K = P[7]
    sig = 1.0 if b >= 0.0 else -1.0
    la = lb - math.log(2.0 * m)
    if la < math.log(K):
        lx = (math.log(K) - la) / m
        if lx > 18.0:
            s = -(math.log(2.0) + lx)
        else:
            s = -math.acosh(math.exp(lx))
    else:
        s = 0.0
    lY, th = log_bubble(s, m, K)
    Y = math.exp(lY - lb)
    return t - s, sig, -sig * Y, sig - sig * (-m * th * Y), lb


@njit(cache=True)
def _grow(a, n):
    out = np.empty(n, dtype=a.dtype)
    out[: a.size] = a
    return out


@njit(cache=True)
def _store(buf_t, buf_w, buf_v, buf_mu, buf_seg, n, t, w, v, mu, sg):
    if n >= buf_t.size:
        cap = 2 * buf_t.size
        buf_t = _grow(buf_t, cap)
        buf_w = _grow(buf_w, cap)
        buf_v = _grow(buf_v, cap)
        buf_mu = _grow(buf_mu, cap)
        buf_seg = _grow(buf_seg, cap)
    buf_t[n] = t
    buf_w[n] = w
    buf_v[n] = v
    buf_mu[n] = mu
    buf_seg[n] = sg
    return buf_t, buf_w, buf_v, buf_mu, buf_seg


@njit(cache=True)
def integrate(t0, w0, v0, tref0, sig0, mu0, t_end, P, rtol, max_nodes,
              tangency, log_y_cap, max_steps):
    """Adaptive DOP853 march in t with node detection and re-referencing.

    Stops at t_end, after ``max_nodes`` sign changes of y (when >= 0), on a
    tangential zero, when log|y| exceeds ``log_y_cap``, or on step failure.
    A zero is tangential when |y_t| there is below ``tangency`` times the
    size of (y, y_t) at the start of the step that crossed it.

    Returns (ts, ws, vs, mus, seg, trefs, sigs, nodes, node_signs,
    node_logslopes, reason).  Node points appear twice in ts: once closing
    the old segment and once opening the new one.
    """
    cap = 4096
    ts = np.empty(cap)
    ws = np.empty(cap)
    vs = np.empty(cap)
    mus = np.empty(cap)
    seg = np.empty(cap, dtype=np.int64)
    trefs = np.empty(64)
    sigs = np.empty(64)
    nodes = np.empty(64)
    nsigns = np.empty(64)
    lslopes = np.empty(64)
    nn = 0
    ns = 1
    trefs[0] = tref0
    sigs[0] = sig0
    t = t0
    w = w0
    v = v0
    mu = mu0
    tref = tref0
    sig = sig0
    ts, ws, vs, mus, seg = _store(ts, ws, vs, mus, seg, 0, t, w, v, mu, 0)
    n = 1
    wmax = max(abs(w), abs(v))
    h = min(0.05, 0.01 * (t_end - t0))
    reason = TERM_REACHED
    steps = 0
    while t < t_end:
        steps += 1
        if steps > max_steps:
            reason = TERM_STEP_FAILURE
            break
        if t + h > t_end:
            h = t_end - t
        fl = max(1e-3 * rtol * wmax, 1e-300)
        w1, v1, err = dop853_step(t, w, v, h, tref, sig, mu, P, rtol, fl, fl)
        if not (err < 1.0) or not math.isfinite(w1) or not math.isfinite(v1):
            if err != err or not math.isfinite(w1) or not math.isfinite(v1):
                fac = 0.2
            else:
                fac = max(0.2, 0.9 * err ** (-1.0 / 8.0))
            h *= fac
            if h < 1e-14 * max(1.0, abs(t)):
                reason = TERM_STEP_FAILURE
                break
            continue
        t1 = t + h
        y0, yt0, nu0 = y_of(t, w, v, tref, sig, mu, P)
        y1, yt1, nu1 = y_of(t1, w1, v1, tref, sig, mu, P)
        if y1 != 0.0 and math.log(abs(y1)) + nu1 > log_y_cap:
            reason = TERM_BLOW_UP
            break
        # inside a segment y keeps the sign of its reference bubble
        # a sign change inside the final (clipped) step still counts; only a
        # zero landing exactly on t_end is left to the caller
        crossed = sig * y1 < 0.0 or (y1 == 0.0 and t1 < t_end)
        if crossed:
            lo = 0.0
            hi = h
            pos = sig > 0.0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                wm, vm, _e = dop853_step(t, w, v, mid, tref, sig, mu, P, rtol, fl, fl)
                ym, _d, _n = y_of(t + mid, wm, vm, tref, sig, mu, P)
                if ym != 0.0 and (ym > 0.0) == pos:
                    lo = mid
                else:
                    hi = mid
            wz, vz, _e = dop853_step(t, w, v, hi, tref, sig, mu, P, rtol, fl, fl)
            tz = t + hi
            yz, ytz, nuz = y_of(tz, wz, vz, tref, sig, mu, P)
            ts, ws, vs, mus, seg = _store(ts, ws, vs, mus, seg, n, tz, wz, vz, mu, ns - 1)
            n += 1
            if nn >= nodes.size:
                nodes = _grow(nodes, 2 * nodes.size)
                nsigns = _grow(nsigns, 2 * nsigns.size)
                lslopes = _grow(lslopes, 2 * lslopes.size)
            nodes[nn] = tz
            nsigns[nn] = 1.0 if ytz > 0.0 else -1.0
            lslopes[nn] = (math.log(abs(ytz)) + nuz) if ytz != 0.0 else -math.inf
            nn += 1
            lref = math.log(max(abs(y0), abs(yt0))) + nu0
            if lslopes[nn - 1] - lref <= math.log(tangency):
                reason = TERM_TANGENCY
                t = tz
                break
            if max_nodes >= 0 and nn >= max_nodes:
                reason = TERM_NODE_LIMIT
                t = tz
                break
            tref, sig, w, v, mu = rereference(tz, ytz, lslopes[nn - 1], P)
            if ns >= trefs.size:
                trefs = _grow(trefs, 2 * trefs.size)
                sigs = _grow(sigs, 2 * sigs.size)
            trefs[ns] = tref
            sigs[ns] = sig
            ns += 1
            t = tz
            ts, ws, vs, mus, seg = _store(ts, ws, vs, mus, seg, n, t, w, v, mu, ns - 1)
            n += 1
            wmax = max(abs(w), abs(v))
            h = min(h, 0.05)
            continue
        t = t1
        w = w1
        v = v1
        # keep the scaled deviation near order one
        big = max(abs(w), abs(v))
        if big > 0.0 and abs(math.log(big)) > RESCALE:
            d = math.log(big)
            sc = math.exp(-d)
            w *= sc
            v *= sc
            wmax *= sc
            mu += d
        wmax = max(wmax, abs(w), abs(v))
        ts, ws, vs, mus, seg = _store(ts, ws, vs, mus, seg, n, t, w, v, mu, ns - 1)
        n += 1
        if err == 0.0:
            fac = 10.0
        else:
            fac = min(10.0, max(0.2, 0.9 * err ** (-1.0 / 8.0)))
        h = min(h * fac, 1.0)
    return (ts[:n], ws[:n], vs[:n], mus[:n], seg[:n], trefs[:ns], sigs[:ns],
            nodes[:nn], nsigns[:nn], lslopes[:nn], reason)


@njit(cache=True)
def evaluate(tq, ts, ws, vs, mus, seg, trefs, sigs, P, rtol):
    """Dense evaluation at the query points.

    Each query takes one DOP853 step from the last stored point at or before
    it, so the interpolant carries the integrator's own local accuracy.
    Returns (y, y_t, z) in units of e^nu together with nu for each query,
    z = y_t - m y.
    """
    nq = tq.size
    yo = np.empty(nq)
    yto = np.empty(nq)
    zo = np.empty(nq)
    nuo = np.empty(nq)
    for i in range(nq):
        q = tq[i]
        k = np.searchsorted(ts, q, side="right") - 1
        if k < 0:
            k = 0
        sg = seg[k]
        h = q - ts[k]
        if h == 0.0:
            w1 = ws[k]
            v1 = vs[k]
        else:
            w1, v1, _e = dop853_step(ts[k], ws[k], vs[k], h, trefs[sg], sigs[sg],
                                     mus[k], P, rtol, 1.0, 1.0)
        yo[i], yto[i], nuo[i] = y_of(q, w1, v1, trefs[sg], sigs[sg], mus[k], P)
        zo[i] = z_of(q, w1, v1, trefs[sg], sigs[sg], mus[k], P)
    return yo, yto, zo, nuo
