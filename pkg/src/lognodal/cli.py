"""Command line interface: ``lognodal solve|verify|sweep|glue``.

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
3 a verification gate failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bubbles, estimates, glue, shoot
from .model import Params, RadialFn
from .quadrature import log_grid

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_GATE = 0, 1, 2, 3

CHECKS = ("bubbles", "bc-gap", "nodal-gap", "logsob", "cross-term", "continuation", "miranda")
SWEEP_AXES = ("lambda", "theta", "eps", "p")
SWEEP_QUANTITIES = ("level", "bc-gap") + bubbles.QUANTITIES


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on.  Round-trips through JSON unchanged."""

    N: int = 6
    lam: float = 0.0
    theta: float = 1.0
    p: float | None = None
    R: float = 1.0
    k: int = 1
    sign: int = 1
    k_max: int = 3
    method: str = "shoot"
    rtol: float | None = None
    rho: float = 0.25
    eps_lo: int = 4
    eps_hi: int = 10
    alpha: float = 1.0
    beta: float = -1.0
    schedule: list | None = None
    seed: int = 0
    samples: int = 100
    logsob_a: float = math.pi / 2.0
    axis: str = "theta"
    values: list = field(default_factory=list)
    quantity: str = "bc-gap"
    out: str | None = None
    format: str = "csv"
    plot: bool = False
    jobs: int = 1

    _KEYS = {"lambda": "lam"}

    def params(self) -> Params:
        try:
            return Params(dim=self.N, lam=self.lam, theta=self.theta,
                          exponent=self.p, radius=self.R)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        names = {f.name for f in fields(cls)}
        kw = {}
        for key, val in d.items():
            name = cls._KEYS.get(key, key)
            if name not in names or name.startswith("_"):
                raise ConfigError(f"unknown configuration key {key!r}")
            kw[name] = val
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        for name, kind in (("N", int), ("k", int), ("k_max", int), ("eps_lo", int),
                           ("eps_hi", int), ("seed", int), ("samples", int), ("jobs", int)):
            v = getattr(self, name)
            need(isinstance(v, int) and not isinstance(v, bool), f"{name} must be an integer")
        for name in ("lam", "theta", "R", "rho", "alpha", "beta", "logsob_a"):
            v = getattr(self, name)
            need(isinstance(v, (int, float)) and not isinstance(v, bool)
                 and math.isfinite(v), f"{name} must be a finite number")
        need(self.p is None or isinstance(self.p, (int, float)), "p must be a number")
        need(self.rtol is None or (isinstance(self.rtol, (int, float)) and 0 < self.rtol < 1e-3),
             "rtol must lie in (0, 1e-3)")
        need(self.k >= 1, "k must be at least 1")
        need(self.k_max >= 1, "k_max must be at least 1")
        need(self.sign in (1, -1), "sign must be +1 or -1")
        need(self.method in ("shoot", "glue"), "method must be 'shoot' or 'glue'")
        need(0 <= self.eps_lo < self.eps_hi, "need 0 <= eps_lo < eps_hi")
        need(self.samples >= 1 and self.jobs >= 1, "samples and jobs must be positive")
        need(self.axis in SWEEP_AXES, f"axis must be one of {SWEEP_AXES}")
        need(self.quantity in SWEEP_QUANTITIES, f"quantity must be one of {SWEEP_QUANTITIES}")
        need(self.format in ("csv", "json"), "format must be 'csv' or 'json'")
        need(isinstance(self.values, list), "values must be a list")
        need(self.schedule is None or isinstance(self.schedule, list), "schedule must be a list")
        self.params()

    @property
    def rtol_value(self) -> float:
        return self.rtol if self.rtol is not None else shoot.default_rtol()


# ----------------------------------------------------------------------------
# output helpers


def fmt_log(sign: float, log_abs: float) -> str:
    """Decimal string for sign * e^log_abs, also beyond the double range."""
    if sign == 0 or log_abs == -math.inf:
        return "0"
    if log_abs < 700.0:
        return repr(float(sign * math.exp(log_abs)))
    # the log itself carries ~16 digits, so the mantissa of a number this
    # large is good to about 12; print no more than that
    l10 = log_abs / math.log(10.0)
    e = math.floor(l10)
    mant = f"{10.0 ** (l10 - e):.11f}"
    if mant.startswith("10"):
        mant, e = f"{1.0:.11f}", e + 1
    return f"{'-' if sign < 0 else ''}{mant}e+{e}"


def profile_rows(fn):
    """(r, u, du) strings for a RadialFn, exact also where u overflows."""
    m = fn.m
    t = fn.grid.t
    rows = []
    with np.errstate(divide="ignore"):
        lu = np.log(np.abs(fn.y)) - m * t
        ld = np.log(np.abs(fn.z)) - (m + 1.0) * t
    for i in range(t.size):
        rows.append((repr(float(fn.grid.r[i])), fmt_log(np.sign(fn.y[i]), lu[i]),
                     fmt_log(np.sign(fn.z[i]), ld[i])))
    return rows


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def svg_plot(x, y, *, xlabel="r", ylabel="u", vlines=(), title="") -> str:
    """A small self-contained SVG line plot with linear axes."""
    W, H, L, B, T, Rm = 640, 400, 70, 50, 30, 20
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size == 0:
        x, y = np.array([0.0, 1.0]), np.array([0.0, 0.0])
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(min(y.min(), 0.0)), float(max(y.max(), 0.0))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(v):
        return L + (v - x0) / (x1 - x0) * (W - L - Rm)

    def py(v):
        return H - B - (v - y0) / (y1 - y0) * (H - B - T)

    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" style="fill:#ffffff"/>',
           f'<line x1="{L}" y1="{H - B}" x2="{W - Rm}" y2="{H - B}" style="stroke:#000000"/>',
           f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" style="stroke:#000000"/>']
    if y0 < 0 < y1:
        out.append(f'<line x1="{L}" y1="{py(0):.2f}" x2="{W - Rm}" y2="{py(0):.2f}" '
                   'style="stroke:#999999;stroke-dasharray:4,3"/>')
    for v in vlines:
        if x0 <= v <= x1:
            out.append(f'<line x1="{px(v):.2f}" y1="{T}" x2="{px(v):.2f}" y2="{H - B}" '
                       'style="stroke:#cc3333"/>')
    out.append(f'<polyline points="{pts}" style="fill:none;stroke:#1f5fa8;stroke-width:1.5"/>')
    for v in (x0, x1):
        out.append(f'<text x="{px(v):.2f}" y="{H - B + 18}" style="font:11px sans-serif;'
                   f'text-anchor:middle">{v:.4g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{L - 6}" y="{py(v) + 4:.2f}" style="font:11px sans-serif;'
                   f'text-anchor:end">{v:.4g}</text>')
    out.append(f'<text x="{(W + L) / 2:.1f}" y="{H - 10}" style="font:12px sans-serif;'
               f'text-anchor:middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{(H - B + T) / 2:.1f}" style="font:12px sans-serif" '
               f'transform="rotate(-90 16 {(H - B + T) / 2:.1f})">{_esc(ylabel)}</text>')
    if title:
        out.append(f'<text x="{(W + L) / 2:.1f}" y="18" style="font:13px sans-serif;'
                   f'text-anchor:middle">{_esc(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _write_files(out: str | None, files: dict):
    """Write all files at once: into a temp dir first, then move in place."""
    if out is None:
        for name, text in files.items():
            if name.endswith(".json") or name.endswith(".csv"):
                sys.stdout.write(text)
        return
    dest = Path(out)
    dest.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=dest) as tmp:
        for name, text in files.items():
            (Path(tmp) / name).write_text(text)
        for name in files:
            os.replace(Path(tmp) / name, dest / name)


def _csv(header, rows) -> str:
    return "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n"


def _note_regime(params: Params):
    if params.dim < 6:
        print(f"exploratory: N = {params.dim} is below 6, outside the range where the "
              "energy gaps are asserted", file=sys.stderr)


# ----------------------------------------------------------------------------
# commands


def _profile_files(fn, summary: dict, cfg: RunConfig, nodes, stem="solution") -> dict:
    files = {}
    rows = profile_rows(fn)
    if cfg.format == "csv":
        files[f"{stem}.csv"] = _csv(("r", "u", "du"), rows)
    else:
        files[f"{stem}.json"] = dump_json({"r": [r[0] for r in rows],
                                           "u": [r[1] for r in rows],
                                           "du": [r[2] for r in rows]})
    files["summary.json"] = dump_json(summary)
    if cfg.plot:
        with np.errstate(over="ignore"):
            u = fn.values
        files[f"{stem}.svg"] = svg_plot(fn.grid.r, u, vlines=[float(v) for v in nodes],
                                        title=f"k = {summary.get('k')}")
    return files


def cmd_solve(cfg: RunConfig) -> int:
    params = cfg.params()
    _note_regime(params)
    if cfg.method == "glue":
        return cmd_glue(cfg)
    opts = shoot.ShootOptions(rtol=cfg.rtol)
    try:
        res = shoot.shoot_k(params, cfg.k, cfg.sign, opts)
    except shoot.ShootingError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        rows = [(repr(r[0]), repr(r[1]), str(r[2]), repr(r[3]), str(r[4]))
                for r in (exc.scan or [])]
        scan = _csv(("tau", "log_abs_u0", "interior_zeros", "y_R", "reason"), rows)
        if cfg.out is not None:
            _write_files(cfg.out, {"scan.csv": scan})
        else:
            sys.stderr.write(scan)
        return EXIT_SOLVER
    summary = dict(res.summary(), method="shoot", rtol=cfg.rtol_value)
    _write_files(cfg.out, _profile_files(res.solution, summary, cfg, res.node_radii))
    return EXIT_OK


def cmd_glue(cfg: RunConfig) -> int:
    params = cfg.params()
    try:
        g = glue.optimize_nodes(params, cfg.k, leading_sign=float(cfg.sign), rtol=cfg.rtol)
    except glue.GlueError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    ratio = g.mismatch_ratio()
    summary = {
        "params": params.to_dict(), "k": g.k, "sign": cfg.sign, "method": "glue",
        "rtol": cfg.rtol_value, "energy": g.total_energy,
        "node_log_radii": [float(x) for x in g.node_t],
        "node_radii": [float(x) for x in g.nodes],
        "relative_mismatches": list(g.relative_mismatches),
        "mismatch_ratio": list(ratio), "converged": bool(g.converged),
        "piece_energies": [p.energy for p in g.pieces],
    }
    _write_files(cfg.out, _profile_files(g.solution, summary, cfg, g.nodes))
    if not estimates.glue_passes(g):
        print("node optimisation did not converge", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _sub(name, passed, **kw):
    return dict(name=name, passed=bool(passed), **kw)


def _check_bubbles(cfg, params):
    subs = []
    S = bubbles.sobolev_level(params.dim)
    closed = bubbles.talenti_constant(params.dim) ** (params.dim / 2.0)
    subs.append(_sub("sobolev_closed_form", abs(S - closed) <= 1e-6 * closed,
                     value=S, reference=closed))
    for e in (0.1, 1.0, 10.0):
        g, c = bubbles.bubble_integrals(e, params.dim)
        d = abs(g - c) / S
        subs.append(_sub(f"identity_eps_{e:g}", d <= 1e-8, value=d))
    eps = bubbles.default_eps_list(cfg.rho, cfg.eps_lo, cfg.eps_hi)
    spec = bubbles.BubbleSpec(1.0, cfg.rho, params.dim)
    for q, (target, tol) in bubbles.expected_exponents(params.dim).items():
        f = bubbles.asymptotic_sweep(q, eps, spec)
        subs.append(_sub(f"exponent_{q}", abs(f.exponent - target) <= tol and f.r_squared >= 0.999,
                         value=f.exponent, target=target, tolerance=tol, r_squared=f.r_squared))
    f = bubbles.asymptotic_sweep("log_moment", eps, spec)
    subs.append(_sub("log_moment_coefficient",
                     f.coefficient > 0 and f.coefficient_spread <= 0.1 and f.r_squared >= 0.999,
                     value=f.coefficient, spread=f.coefficient_spread, r_squared=f.r_squared))
    return subs


def _gap_sub(name, g):
    return _sub(name, g.verified, sign=g.sign, log10_margin=g.log10_margin,
                naive_margin=g.naive_margin, status=g.status, levels=g.levels,
                uncertainty=g.uncertainty)


def _check_logsob(cfg, params):
    subs = []
    a = cfg.logsob_a
    grid = log_grid([math.log(params.radius) - 14.0, math.log(params.radius)], params.dim)
    margins = []
    for f, df in estimates.random_radial_functions(cfg.samples, params.dim, cfg.seed,
                                                   params.radius):
        margins.append(estimates.logsobolev_check(RadialFn.from_callable(grid, f, df), a))
    margins = np.array(margins)
    subs.append(_sub("random_functions", bool(np.all(margins >= 0)), count=int(margins.size),
                     min_margin=float(margins.min()), failures=int(np.sum(margins < 0))))
    for k in (1, 2):
        try:
            r = shoot.shoot_k(params, k, 1.0, shoot.ShootOptions(rtol=cfg.rtol))
        except shoot.ShootingError as exc:
            subs.append(_sub(f"solution_k{k}", False, status=str(exc)))
            continue
        mg = estimates.logsobolev_check(r.solution, a)
        subs.append(_sub(f"solution_k{k}", mg >= 0, margin=mg))
    return subs


def cmd_verify(cfg: RunConfig, check: str) -> int:
    if check not in CHECKS:
        print(f"unknown check {check!r}; expected one of {', '.join(CHECKS)}", file=sys.stderr)
        return EXIT_USAGE
    params = cfg.params()
    _note_regime(params)
    notes = []
    try:
        if check == "bubbles":
            subs = _check_bubbles(cfg, params)
        elif check == "bc-gap":
            subs = [_gap_sub("bc", estimates.gap_check_bc(params, cfg.rtol))]
            notes.append("B is bounded by the radial two-domain level B_2 (B <= B_2)")
        elif check == "nodal-gap":
            subs = [_gap_sub(f"nodal_k{k}", estimates.gap_check_nodal(params, k, cfg.rtol))
                    for k in range(1, cfg.k_max + 1)]
        elif check == "logsob":
            subs = _check_logsob(cfg, params)
            a = cfg.logsob_a
            gauss = estimates.gaussian_radial(math.pi / (2.0 * a), params.dim)
            notes.append(
                "not gated: for exp(-b|x|^2) with b = pi/(2a) the inequality as tested "
                f"has margin {estimates.logsobolev_check(gauss, a):.6g}; the sharp form with "
                f"a^2/pi has margin {estimates.logsobolev_sharp_check(gauss, a):.6g}")
        elif check == "cross-term":
            eps = bubbles.default_eps_list(cfg.rho, cfg.eps_lo, cfg.eps_hi)
            r = estimates.cross_term_check(cfg.alpha, cfg.beta, eps, params, cfg.rho)
            q = (params.dim - 2) / 2.0
            subs = [_sub("norm_defect_decay", r.d5_exponent >= q - 0.3, value=r.d5_exponent,
                         r_squared=r.d5_fit.r_squared),
                    _sub("log_defect_bound", bool(np.all(r.log_bound_holds)), K=r.k6,
                         K_spread=r.k6_spread, d6=list(r.d6), eps=list(r.eps))]
        elif check == "continuation":
            tr = estimates.continuation(params, max(2, cfg.k), cfg.schedule, cfg.rtol)
            B = estimates.nodal_level(params, max(2, cfg.k))
            gate = estimates.continuation_gate(tr, B)
            subs = [_sub("branch_tracked", gate["tracked"], steps=len(tr)),
                    _sub("final_level", gate["final_rel"] <= 1e-2, value=gate["final_rel"]),
                    _sub("limsup_surrogate", gate["tail_ratio"] <= 1.01, value=gate["tail_ratio"]),
                    _sub("trace", True, p=[s.p for s in tr], levels=[s.level for s in tr],
                         critical_level=B, extrapolated=gate["extrapolated"])]
        else:  # miranda
            eps = min(bubbles.default_eps_list(cfg.rho, cfg.eps_lo, cfg.eps_hi))
            mr = estimates.miranda_project(params, eps, cfg.rho)
            g2 = glue.optimize_nodes(params, 2, rtol=cfg.rtol)
            subs = [_sub("nehari_pair", max(abs(mr.residual_plus), abs(mr.residual_minus)) <= 1e-8,
                         residuals=[mr.residual_plus, mr.residual_minus],
                         alpha=mr.alpha, beta=mr.beta),
                    _sub("below_threshold", mr.below_threshold, energy=mr.energy,
                         threshold=mr.threshold, excess=mr.energy - mr.threshold, eps=eps),
                    _sub("above_B2", g2.total_energy <= mr.energy, B_2=g2.total_energy)]
    except (shoot.ShootingError, glue.GlueError, RuntimeError, ArithmeticError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    passed = all(s["passed"] for s in subs)
    report = {"check": check, "params": params.to_dict(), "passed": passed,
              "subchecks": subs, "notes": notes}
    _write_files(cfg.out, {"report.json": dump_json(report)})
    return EXIT_OK if passed else EXIT_GATE


def _sweep_point(args):
    axis, value, quantity, base = args
    cfg = RunConfig.from_dict(base)
    try:
        if axis == "eps":
            spec = bubbles.BubbleSpec(float(value), cfg.rho, cfg.N)
            q = quantity if quantity in bubbles.QUANTITIES else "log_moment"
            return value, bubbles.bubble_quantity(q, spec), "ok"
        kw = {"lambda": "lam", "theta": "theta", "p": "exponent"}
        params = cfg.params().replace(**{kw[axis]: float(value)})
        if quantity == "bc-gap":
            g = estimates.gap_check_bc(params, cfg.rtol)
            if not g.verified and g.status != "ok":
                return value, math.nan, g.status
            return value, g.sign * g.log10_margin, "ok"
        if quantity == "level":
            if cfg.k == 1:
                return value, estimates.ground_level(params), "ok"
            return value, estimates.nodal_level(params, cfg.k), "ok"
        return value, math.nan, f"quantity {quantity} needs the eps axis"
    except Exception as exc:  # recorded per point, the sweep goes on
        return value, math.nan, type(exc).__name__


def cmd_sweep(cfg: RunConfig) -> int:
    values = [float(v) for v in cfg.values]
    if not values:
        print("empty sweep grid", file=sys.stderr)
        return EXIT_USAGE
    base = cfg.to_dict()
    base["values"] = []
    jobs = [(cfg.axis, v, cfg.quantity, base) for v in values]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            out = list(ex.map(_sweep_point, jobs))
    else:
        out = [_sweep_point(j) for j in jobs]
    rows = [(repr(v), repr(float(val)) if math.isfinite(val) else "nan", st)
            for v, val, st in out]
    files = {"sweep.csv": _csv(("axis", "value", "status"), rows)}
    if cfg.plot:
        files["sweep.svg"] = svg_plot([o[0] for o in out], [o[1] for o in out],
                                      xlabel=cfg.axis, ylabel=cfg.quantity)
    _write_files(cfg.out, files)
    ok = sum(1 for o in out if o[2] == "ok")
    return EXIT_OK if ok >= 0.8 * len(out) else EXIT_SOLVER


# ----------------------------------------------------------------------------
# argument parsing


def _sign(s: str) -> int:
    if s in ("+", "+1", "1", "pos"):
        return 1
    if s in ("-", "-1", "neg"):
        return -1
    raise argparse.ArgumentTypeError(f"sign must be + or -, got {s!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--plot", action="store_true", default=None)
    common.add_argument("--jobs", type=int)
    common.add_argument("--N", type=int)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--p", type=float)
    common.add_argument("--R", type=float)
    common.add_argument("--k", type=int)
    common.add_argument("--sign", type=_sign)
    common.add_argument("--rtol", type=float)
    common.add_argument("--k-max", dest="k_max", type=int)

    ap = argparse.ArgumentParser(prog="lognodal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="radial solution with k nodal domains")
    s.add_argument("--method", choices=("shoot", "glue"))
    sub.add_parser("glue", parents=[common], help="k-domain solution by gluing pieces")
    v = sub.add_parser("verify", parents=[common], help="run a named verification")
    v.add_argument("check", help="one of: " + ", ".join(CHECKS))
    v.add_argument("--alpha", type=float)
    v.add_argument("--beta", type=float)
    v.add_argument("--seed", type=int)
    w = sub.add_parser("sweep", parents=[common], help="parameter study")
    w.add_argument("--axis", choices=SWEEP_AXES)
    w.add_argument("--values", type=lambda s: [float(x) for x in s.split(",") if x.strip()])
    w.add_argument("--quantity", choices=SWEEP_QUANTITIES)
    return ap


_FLAG_KEYS = ("N", "lam", "theta", "p", "R", "k", "sign", "k_max", "rtol", "out", "format",
              "plot", "jobs", "method", "alpha", "beta", "seed", "axis", "values", "quantity")


def load_config(ns) -> RunConfig:
    base = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("configuration must be a JSON object")
    cfg = RunConfig.from_dict(base)
    d = cfg.to_dict()
    for key in _FLAG_KEYS:
        v = getattr(ns, key, None)
        if v is not None:
            d["lambda" if key == "lam" else key] = v
    return RunConfig.from_dict(d)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(ns)
    except (ConfigError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if ns.command == "solve":
        return cmd_solve(cfg)
    if ns.command == "glue":
        return cmd_glue(cfg)
    if ns.command == "verify":
        return cmd_verify(cfg, ns.check)
    return cmd_sweep(cfg)


if __name__ == "__main__":
    sys.exit(main())
