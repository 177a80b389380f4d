import math

import numpy as np
import pytest
from scipy import integrate as spi

from lognodal import bubbles
from lognodal.quadrature import integrate_halfline, sphere_area


@pytest.mark.parametrize("dim", [4, 5, 6, 7])
@pytest.mark.parametrize("eps", [0.01, 1.0, 30.0])
def test_bubble_solves_critical_equation(dim, eps):
    # -U'' - (N-1)/r U' = U^{(N+2)/(N-2)}, checked with central differences
    r = np.geomspace(0.05, 20.0, 9) * eps
    h = 1e-3 * r
    U = lambda x: bubbles.bubble_value(eps, x, dim)
    d2 = (U(r + h) - 2 * U(r) + U(r - h)) / h ** 2
    d1 = bubbles.bubble_deriv(eps, r, dim)
    lhs = -d2 - (dim - 1) / r * d1
    rhs = U(r) ** ((dim + 2) / (dim - 2))
    # far out the two Laplacian terms nearly cancel, so scale by their size
    scale = np.abs(d2) + np.abs((dim - 1) / r * d1)
    assert np.all(np.abs(lhs - rhs) <= 1e-5 * scale)


def test_derivative_matches_difference():
    r = np.linspace(0.1, 2.0, 7)
    h = 1e-6
    fd = (bubbles.bubble_value(0.3, r + h, 6) - bubbles.bubble_value(0.3, r - h, 6)) / (2 * h)
    assert np.allclose(bubbles.bubble_deriv(0.3, r, 6), fd, rtol=1e-8)


def test_log_value_safe_for_tiny_eps():
    lv = bubbles.bubble_log_value(1e-200, 0.5, 6)
    assert lv == pytest.approx(math.log(24.0) + 2 * math.log(1e-200) - 4 * math.log(0.5),
                               rel=1e-12)


@pytest.mark.parametrize("dim", [4, 5, 6, 7, 8])
def test_sobolev_level_closed_form(dim):
    S = bubbles.talenti_constant(dim)
    assert bubbles.sobolev_level(dim) == pytest.approx(S ** (dim / 2), rel=1e-10)


def test_talenti_value_three_dims():
    # S = 3 (pi/2)^{4/3} for N = 3
    assert bubbles.talenti_constant(3) == pytest.approx(3 * (math.pi / 2) ** (4 / 3), rel=1e-14)


@pytest.mark.parametrize("eps", [0.1, 1.0, 10.0])
def test_identity_scale_free(eps):
    g, c = bubbles.bubble_integrals(eps, 6)
    S = bubbles.sobolev_level(6)
    assert abs(g - c) / S <= 1e-8
    assert g == pytest.approx(S, rel=1e-10)


def test_cutoff_profile():
    rho = 0.25
    assert bubbles.cutoff(0.1, rho) == 1.0
    assert bubbles.cutoff(0.5, rho) == 0.0
    assert bubbles.cutoff(0.375, rho) == pytest.approx(0.5)
    x = np.linspace(0.2, 0.55, 50)
    h = 1e-7
    fd = (bubbles.cutoff(x + h, rho) - bubbles.cutoff(x - h, rho)) / (2 * h)
    assert np.allclose(bubbles.cutoff_deriv(x, rho), fd, atol=1e-6)


def _quad_r5(f, a, b):
    val, _ = spi.quad(lambda r: f(r) * r ** 5, a, b, epsabs=0, epsrel=1e-12, limit=200)
    return sphere_area(6) * val


@pytest.mark.parametrize("eps", [0.05, 0.02])
def test_defects_against_quad(eps):
    spec = bubbles.BubbleSpec(eps, 0.25, 6)
    rho = 0.25
    ref_grad = (_quad_r5(lambda r: spec.deriv(r) ** 2, rho, 2 * rho)
                - _quad_r5(lambda r: bubbles.bubble_deriv(eps, r, 6) ** 2, rho, np.inf))
    ref_crit = (_quad_r5(lambda r: spec.value(r) ** 3, rho, 2 * rho)
                - _quad_r5(lambda r: bubbles.bubble_value(eps, r, 6) ** 3, rho, np.inf))
    assert bubbles.bubble_quantity("grad_sq_defect", spec) == pytest.approx(ref_grad, rel=1e-9)
    assert bubbles.bubble_quantity("crit_norm_defect", spec) == pytest.approx(ref_crit, rel=1e-8)


@pytest.mark.parametrize("name,power", [("l2_norm", 2), ("l1_norm", 1), ("crit_minus_one_norm", 2)])
def test_norms_against_quad(name, power):
    spec = bubbles.BubbleSpec(0.03, 0.25, 6)
    ref = (_quad_r5(lambda r: np.abs(spec.value(r)) ** power, 0, 0.25)
           + _quad_r5(lambda r: np.abs(spec.value(r)) ** power, 0.25, 0.5))
    assert bubbles.bubble_quantity(name, spec) == pytest.approx(ref, rel=1e-9)


def test_exponent_fits():
    spec = bubbles.BubbleSpec(1.0, 0.25, 6)
    eps = bubbles.default_eps_list(0.25)
    for q, (target, tol) in bubbles.expected_exponents(6).items():
        f = bubbles.asymptotic_sweep(q, eps, spec)
        assert abs(f.exponent - target) <= tol, q
        assert f.r_squared >= 0.999, q


def test_log_moment_leading_coefficient():
    # psi^2 log psi^2 ~ eps^2 |log eps| (N-2) int_{R^N} U_1^2
    ref = 4.0 * integrate_halfline(lambda r: bubbles.bubble_value(1.0, r, 6) ** 2, 1.0, 6)
    f = bubbles.asymptotic_sweep("log_moment", bubbles.default_eps_list(0.25),
                                 bubbles.BubbleSpec(1.0, 0.25, 6))
    assert f.coefficient > 0
    assert f.coefficient == pytest.approx(ref, rel=0.01)
    assert f.coefficient_spread <= 0.1


def test_sweep_validation():
    with pytest.raises(ValueError):
        bubbles.asymptotic_sweep("nope")
    with pytest.raises(ValueError):
        bubbles.asymptotic_sweep("l2_norm", [0.01, 0.02, 0.03])
    with pytest.raises(ValueError):
        bubbles.asymptotic_sweep("l2_norm", [0.01, 0.02, 0.03, 0.04, 0.2])


def test_spec_validation():
    with pytest.raises(ValueError):
        bubbles.BubbleSpec(0.0)
    with pytest.raises(ValueError):
        bubbles.BubbleSpec(0.1, rho=-1)
    with pytest.raises(ValueError):
        bubbles.BubbleSpec(0.1, dim=2)
