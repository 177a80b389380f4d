import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from lognodal import shoot
from lognodal.model import Params, energy, nehari_residual, sign_split


def scipy_profile(log_a, params, radii, sign=1.0):
    """Plain r-integration of the radial ODE with scipy as an independent oracle."""
    a = sign * math.exp(log_a)
    r0 = 1e-6
    u0, v0 = shoot.series_start(a, params, r0)

    def f(r, s):
        return list(shoot.rhs(r, s[0], s[1], params))

    sol = solve_ivp(f, (r0, params.radius), [u0, v0], method="DOP853", rtol=1e-13,
                    atol=1e-13 * abs(a), t_eval=radii, dense_output=False)
    assert sol.success
    return sol.y[0], sol.y[1]


def test_ground_state_regression(ground):
    assert ground.energy == pytest.approx(919.8587167885, rel=1e-10)
    assert ground.log_a == pytest.approx(5.44297670, abs=1e-7)
    assert ground.nodal_domains == 1 and ground.node_t.size == 0


def test_ground_state_against_scipy(ground):
    radii = np.array([0.05, 0.2, 0.5, 0.8, 0.95])
    u_ref, du_ref = scipy_profile(ground.log_a, ground.params, radii)
    tr = ground.trajectory
    scale = math.exp(ground.log_a)
    assert np.allclose(tr.u_at(radii), u_ref, rtol=0, atol=1e-8 * scale)
    assert np.allclose(tr.du_at(radii), du_ref, rtol=0, atol=1e-7 * scale)
    # the oracle also vanishes at R
    end, _ = scipy_profile(ground.log_a, ground.params, [1.0])
    assert abs(end[0]) < 1e-8 * scale


def test_other_parameters_against_scipy():
    P = Params(lam=1.0, theta=2.0)
    res = shoot.shoot_k(P, 1)
    radii = np.array([0.1, 0.5, 0.9])
    u_ref, _ = scipy_profile(res.log_a, P, radii)
    assert np.allclose(res.trajectory.u_at(radii), u_ref, atol=1e-8 * math.exp(res.log_a))


def test_ground_state_gates(ground):
    assert ground.ode_residual <= 1e-6
    assert max(ground.nehari_residual_per_domain) <= 1e-6
    assert np.all(ground.solution.y >= 0)
    assert abs(ground.boundary_value) < 1e-8 * math.exp(ground.log_a)


def test_energy_is_recomputed_from_profile(ground):
    assert energy(ground.solution, ground.params) == pytest.approx(ground.energy, rel=1e-12)


def test_sign_symmetry(ground, ground_neg, nodal2, nodal2_neg):
    for pos, neg in ((ground, ground_neg), (nodal2, nodal2_neg)):
        assert neg.initial_value < 0 < pos.initial_value
        assert neg.energy == pytest.approx(pos.energy, rel=1e-12)
        assert np.allclose(pos.solution.y, -neg.solution.y, rtol=0,
                           atol=1e-8 * np.abs(pos.solution.y).max())
        assert np.array_equal(pos.node_t, neg.node_t)


def test_two_domains(nodal2):
    assert nodal2.nodal_domains == 2
    assert nodal2.node_t[0] == pytest.approx(-58.8456746, abs=1e-6)
    assert nodal2.ode_residual <= 1e-6
    assert max(nodal2.nehari_residual_per_domain) <= 1e-6
    up, um = sign_split(nodal2.solution)
    P = nodal2.params
    for part in (up, um):
        assert abs(nehari_residual(part, P)) <= 1e-6 * energy(nodal2.solution, P)


def test_high_centre_value_has_no_overflow(nodal2):
    # log|u(0)| of the two-domain solution is far past the double range of
    # its gradient; the summary must stay finite
    s = nodal2.summary()
    assert math.isfinite(s["log_abs_u0"])
    assert s["k"] == 2 and len(s["node_radii"]) == 1


def test_missing_k_raises_with_scan(std_params):
    opts = shoot.ShootOptions(log_a_max=300.0)
    with pytest.raises(shoot.ShootingError) as info:
        shoot.shoot_k(std_params, 3, 1.0, opts)
    scan = info.value.scan
    assert scan and all(len(row) == 5 for row in scan)
    # two interior zeros occur, but the third never enters through R
    assert max(row[2] for row in scan) == 2


def test_bad_k(std_params):
    with pytest.raises(ValueError):
        shoot.shoot_k(std_params, 0)


def test_tau_log_a_inverse():
    for la in (-3.0, 0.0, 5.4, 900.0):
        assert shoot.log_a_from_tau(shoot.tau_from_log_a(la, 6), 6) == pytest.approx(la)


def test_env_tolerance(monkeypatch):
    monkeypatch.setenv("LOGNODAL_TOL", "1e-9")
    assert shoot.default_rtol() == 1e-9
    monkeypatch.setenv("LOGNODAL_TOL", "bogus")
    with pytest.raises(ValueError):
        shoot.default_rtol()
    monkeypatch.delenv("LOGNODAL_TOL")
    assert shoot.default_rtol() == shoot.DEFAULT_RTOL


def test_subcritical_ground_state():
    P = Params(exponent=2.5)
    res = shoot.shoot_k(P, 1)
    radii = np.array([0.2, 0.6])
    u_ref, _ = scipy_profile(res.log_a, P, radii)
    assert np.allclose(res.trajectory.u_at(radii), u_ref, atol=1e-8 * math.exp(res.log_a))
    assert res.ode_residual <= 1e-6
