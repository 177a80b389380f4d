import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as spi

from lognodal.model import (Params, RadialFn, energy, integrals, log_nonlinearity,
                            nehari_project, nehari_residual, project_sign_changing,
                            reduced_energy, relative_nehari_residual, sign_split)
from lognodal.quadrature import build_grid, log_grid, sphere_area

AREA6 = sphere_area(6)


@pytest.fixture(scope="module")
def bump():
    # u = 1 - r^2 on the unit ball in R^6
    grid = log_grid([-14.0, -1.0, 0.0], 6, order=12, width=0.25, grade=20)
    return RadialFn.from_callable(grid, lambda r: 1 - r * r, lambda r: -2 * r)


def test_params_defaults():
    P = Params()
    assert P.p == 3.0 and P.pstar == 3.0 and P.m == 2.0 and P.critical
    assert Params(exponent=2.5).critical is False
    assert P.replace(theta=2.0).theta == 2.0
    assert P.to_dict() == {"N": 6, "lambda": 0.0, "theta": 1.0, "p": 3.0, "R": 1.0}


@pytest.mark.parametrize("kw", [dict(dim=2), dict(dim=4.5), dict(theta=0.0),
                                dict(theta=-1.0), dict(radius=0.0), dict(exponent=2.0),
                                dict(exponent=3.5)])
def test_params_rejects(kw):
    with pytest.raises(ValueError):
        Params(**kw)


def test_integrals_closed_form(bump):
    # with s = r^2: int (1-s)^a s^2 ds / 2 gives Beta values
    I = integrals(bump, 3.0)
    assert I["grad"] == pytest.approx(AREA6 / 2, rel=1e-12)
    assert I["l2"] == pytest.approx(AREA6 / 60, rel=1e-12)
    assert I["lp"] == pytest.approx(AREA6 / 120, rel=1e-12)


def test_log_moment_against_quad(bump):
    f = lambda r: (1 - r * r) ** 2 * math.log((1 - r * r) ** 2) * r ** 5 if r < 1 else 0.0
    ref, _ = spi.quad(f, 0, 1, epsabs=1e-14, epsrel=1e-12, limit=200)
    assert integrals(bump, 3.0)["log"] == pytest.approx(AREA6 * ref, rel=1e-9)


def test_energy_formula(bump):
    P = Params(lam=0.7, theta=1.3)
    I = integrals(bump, 3.0)
    expect = (I["grad"] / 2 - 0.35 * I["l2"] - I["lp"] / 3
              - 0.65 * (I["log"] - I["l2"]))
    assert energy(bump, P) == pytest.approx(expect, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.05, 20.0), lam=st.floats(-2, 2), theta=st.floats(0.1, 3))
def test_reduced_energy_identity(bump, s, lam, theta):
    # L(u) - G(u)/2 does not involve the gradient or the log moment
    P = Params(lam=lam, theta=theta)
    u = bump.scaled(s)
    lhs = energy(u, P) - 0.5 * nehari_residual(u, P)
    assert lhs == pytest.approx(reduced_energy(u, P), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(1e-3, 1e3), theta=st.floats(0.1, 3))
def test_nehari_projection(bump, s, theta):
    P = Params(theta=theta)
    u = bump.scaled(s)
    t = nehari_project(u, P)
    assert relative_nehari_residual(u.scaled(t), P) < 1e-10
    # the projection of the projected function is the identity
    assert nehari_project(u.scaled(t), P) == pytest.approx(1.0, rel=1e-10)


def test_sign_split_and_projection():
    grid = build_grid(1.0, 16, order=10, dim=6)
    u = RadialFn.from_callable(grid, lambda r: np.cos(4 * r) * (1 - r * r),
                               lambda r: -4 * np.sin(4 * r) * (1 - r * r) - 2 * r * np.cos(4 * r))
    up, um = sign_split(u)
    assert np.all(up.y >= 0) and np.all(um.y <= 0)
    assert np.array_equal((up + um).y, u.y)
    s, t = project_sign_changing(u, Params())
    assert abs(nehari_residual(up.scaled(s), Params())) < 1e-9 * integrals(up, 3)["grad"] * s * s
    assert abs(nehari_residual(um.scaled(t), Params())) < 1e-9 * integrals(um, 3)["grad"] * t * t


def test_positive_function_has_no_split(bump):
    with pytest.raises(ValueError):
        project_sign_changing(bump, Params())


def test_zero_function_rejected():
    grid = build_grid(1.0, 8, dim=6)
    z = RadialFn(grid, np.zeros(grid.size), np.zeros(grid.size))
    assert z.is_zero()
    with pytest.raises(ValueError):
        nehari_residual(z, Params())


def test_log_nonlinearity():
    assert log_nonlinearity(0.0) == 0.0
    assert log_nonlinearity(1.0) == 0.0
    assert log_nonlinearity(math.e) == pytest.approx(2 * math.e)
    assert log_nonlinearity(-math.e) == pytest.approx(-2 * math.e)


def test_radialfn_rejects_nonfinite():
    grid = build_grid(1.0, 8, dim=6)
    y = np.zeros(grid.size)
    y[3] = np.nan
    with pytest.raises(ValueError):
        RadialFn(grid, y, np.zeros(grid.size))
