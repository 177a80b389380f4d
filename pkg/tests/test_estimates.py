import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lognodal import bubbles, estimates
from lognodal.model import Params, RadialFn
from lognodal.quadrature import log_grid


def test_sobolev_term():
    assert estimates.sobolev_term(6) == pytest.approx(bubbles.talenti_constant(6) ** 3 / 6,
                                                      rel=1e-10)


@pytest.fixture(scope="module")
def bc_gap(std_params):
    return estimates.gap_check_bc(std_params)


def test_bc_gap_positive(bc_gap, ground, glued2):
    assert bc_gap.status == "ok" and bc_gap.verified
    assert bc_gap.sign == 1.0
    assert bc_gap.log10_margin == pytest.approx(-97.768, abs=5e-3)
    assert bc_gap.uncertainty < 1e-4
    assert bc_gap.levels["C"] == pytest.approx(ground.energy, rel=1e-10)
    assert bc_gap.levels["B_2"] == pytest.approx(glued2.total_energy, rel=1e-12)


def test_plain_difference_is_rounding_noise(bc_gap):
    # the margin is ~1e-98, so C + S/N - B_2 in doubles carries no information
    assert abs(bc_gap.naive_margin) < 1e-10 * bc_gap.levels["B_2"]


def test_hadamard_gap_node_count(std_params, bc_gap):
    t_star = bc_gap.detail["t_star"]
    lm = estimates.hadamard_gap(std_params, t_star, nodes=16)
    assert lm / math.log(10) == pytest.approx(bc_gap.log10_margin, rel=1e-7)


def test_gap_result_properties():
    g = estimates.GapResult("x", 1.0, -120.0, 0.0)
    assert g.verified and g.margin == 1e-120
    bad = estimates.GapResult("x", math.nan, math.nan, math.nan, status="level unavailable")
    assert not bad.verified


def test_nodal_k1_is_bc(std_params, monkeypatch):
    seen = []
    monkeypatch.setattr(estimates, "gap_check_bc",
                        lambda p, rtol=None: seen.append(p) or estimates.GapResult("bc", 1.0, -1.0, 0.0))
    r = estimates.gap_check_nodal(std_params, 1)
    assert seen == [std_params] and r.name == "nodal-1"


def test_continuation_at_critical_exponent(std_params, ground):
    trace = estimates.continuation(std_params, 1, schedule=[3.0])
    assert len(trace) == 1 and trace[0].ok
    assert trace[0].level == pytest.approx(ground.energy, rel=1e-10)


def test_continuation_short_branch(std_params, nodal2):
    trace = estimates.continuation(std_params, 2, schedule=[2.9, 2.95, 2.975])
    assert all(s.ok for s in trace)
    levels = [s.level for s in trace]
    # subcritical levels lie above the critical one and decrease towards it
    assert levels[0] > levels[1] > levels[2] > nodal2.energy


def test_continuation_gate_synthetic():
    Step = estimates.ContinuationStep
    trace = [Step(2.5, 1.5, None, True), Step(2.9, 1.009, None, True),
             Step(2.99, 1.004, None, True)]
    g = estimates.continuation_gate(trace, 1.0, tail=2)
    assert g["tracked"] and g["passed"]
    assert g["final_rel"] == pytest.approx(0.004)
    assert g["tail_ratio"] == pytest.approx(1.009)
    g = estimates.continuation_gate(trace, 1.0)
    assert g["tail_ratio"] == pytest.approx(1.5) and not g["passed"]
    lost = trace[:2] + [Step(2.99, math.nan, None, False)]
    assert not estimates.continuation_gate(lost, 1.0, tail=2)["tracked"]


def test_schedule_validation(std_params):
    with pytest.raises(ValueError):
        estimates.continuation(std_params, 2, schedule=[2.9, 2.8])
    with pytest.raises(ValueError):
        estimates.continuation(std_params, 2, schedule=[3.5])


GRID = log_grid([-14.0, 0.0], 6, order=12)


def test_random_functions_deterministic_and_dirichlet():
    a = estimates.random_radial_functions(5, 6, seed=3)
    b = estimates.random_radial_functions(5, 6, seed=3)
    r = np.linspace(0, 1, 11)
    for (f, df), (g, dg) in zip(a, b):
        assert np.array_equal(f(r), g(r))
        assert f(1.0) == 0.0
        h = 1e-6
        assert df(0.5) == pytest.approx((f(0.5 + h) - f(0.5 - h)) / (2 * h), rel=1e-6, abs=1e-9)


def test_logsobolev_random_suite():
    margins = [estimates.logsobolev_check(RadialFn.from_callable(GRID, f, df), math.pi / 2)
               for f, df in estimates.random_radial_functions(100, 6, seed=0)]
    assert min(margins) >= 0


def test_logsobolev_on_solutions(ground, nodal2):
    for res in (ground, nodal2):
        assert estimates.logsobolev_check(res.solution, math.pi / 2) >= 0


def _gaussian(b):
    return estimates.gaussian_radial(b, 6)


def test_quoted_form_fails_for_gaussian():
    # with b = pi / (2a) the margin of the quoted form is -(N/2) log(a) |u|^2,
    # negative for a = pi / 2 > 1
    a = math.pi / 2
    u = _gaussian(math.pi / (2 * a))
    l2 = (math.pi / (2 * (math.pi / (2 * a)))) ** 3
    expect = -3.0 * math.log(a) * l2
    assert estimates.logsobolev_check(u, a) == pytest.approx(expect, rel=1e-8)
    assert estimates.logsobolev_check(u, a) < 0


def test_sharp_form_equality_at_extremal():
    a = math.pi / 2
    u = _gaussian(math.pi / (2 * a * a))
    assert abs(estimates.logsobolev_sharp_check(u, a)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(b=st.floats(0.3, 4.0), a=st.floats(0.5, 3.0))
def test_sharp_form_holds_for_gaussians(b, a):
    # margin = N |u|^2 (a^2 b / pi - 1/2 log(2 a^2 b / pi) - 1/2) >= 0
    u = _gaussian(b)
    x = 2 * a * a * b / math.pi
    l2 = (math.pi / (2 * b)) ** 3
    expect = 6 * l2 * 0.5 * (x - math.log(x) - 1)
    got = estimates.logsobolev_sharp_check(u, a)
    assert got == pytest.approx(expect, rel=1e-7, abs=1e-9)
    assert got >= -1e-9


def test_cross_term_short_sweep(std_params, ground):
    eps = bubbles.default_eps_list(0.25, 4, 8)
    rep = estimates.cross_term_check(1.0, -1.0, eps, std_params, u_g=ground)
    assert rep.d5_exponent >= 1.7
    assert np.all(rep.log_bound_holds)
    assert np.all(rep.d6 > 0)
    assert rep.k6 > 0


def test_cross_term_needs_signs(std_params, ground):
    with pytest.raises(ValueError):
        estimates.cross_term_check(1.0, 1.0, params=std_params, u_g=ground)


def test_miranda_pair(std_params, ground, glued2):
    eps = 0.25 * 2.0 ** -8
    mr = estimates.miranda_project(std_params, eps, u_g=ground)
    assert abs(mr.residual_plus) <= 1e-8 and abs(mr.residual_minus) <= 1e-8
    assert 0.5 < mr.alpha < 2.0 and -2.0 < mr.beta < -0.5
    # B_2 is a minimum over a set containing this pair
    assert glued2.total_energy <= mr.energy
    assert mr.threshold == pytest.approx(ground.energy + estimates.sobolev_term(6), rel=1e-12)
