import math

import numpy as np
import pytest

from lognodal import glue
from lognodal.model import Params


def test_ball_piece_is_ground_state(std_params, ground):
    piece = glue.ball_piece(std_params, 0.0)
    assert piece.is_ball
    assert piece.energy == pytest.approx(ground.energy, rel=1e-10)
    assert piece.shape == pytest.approx(ground.tau, abs=1e-9)


def test_annulus_piece_positive_with_zero_ends(std_params):
    piece = glue.annulus_piece(std_params, -3.0, 0.0)
    fn = piece.radialfn()
    assert np.all(fn.y >= 0)
    assert piece.end_value_relative() < 1e-9
    assert math.isfinite(piece.log_flux_in) and math.isfinite(piece.log_flux_out)


def test_glued_matches_shooting(glued2, nodal2):
    assert glued2.converged
    assert glued2.total_energy == pytest.approx(nodal2.energy, rel=1e-10)
    assert glued2.node_t[0] == pytest.approx(nodal2.node_t[0], abs=1e-7)
    assert np.all(glued2.mismatch_ratio() <= 1e-5)


def test_glued_profile_alternates(glued2):
    fn = glued2.solution
    t = fn.grid.t
    node = glued2.node_t[0]
    assert np.all(fn.y[t < node] >= 0) and np.all(fn.y[t > node] <= 0)


def _glued_energy(params, t):
    return sum(p.energy for p in glue.pieces_for(params, [t]))


def test_hadamard_derivative_integrates_to_energy_change(std_params):
    # int_{-3}^{-2} dE/dt dt with 8-point Gauss-Legendre against E(-2) - E(-3)
    x, w = np.polynomial.legendre.leggauss(8)
    ts = -2.5 + 0.5 * x
    vals = [glue.hadamard_derivative(std_params, t, -math.inf, 0.0) for t in ts]
    integral = 0.5 * float(np.dot(w, vals))
    diff = _glued_energy(std_params, -2.0) - _glued_energy(std_params, -3.0)
    assert integral == pytest.approx(diff, rel=1e-7)


def test_hadamard_derivative_sign_matches_flux_ratio(std_params):
    # phi < 0 (annulus side steeper) means the energy grows as the node moves out
    for t in (-10.0, -2.0):
        phi = glue.flux_log_ratio(std_params, t, -math.inf, 0.0)[0]
        d = glue.hadamard_derivative(std_params, t, -math.inf, 0.0)
        assert np.sign(d) == -np.sign(phi)


def test_nelder_mead_agrees(std_params, glued2):
    g = glue.optimize_nodes(std_params, 2, method="nelder-mead",
                            init_log_nodes=[glued2.node_t[0] + 0.5])
    assert g.total_energy == pytest.approx(glued2.total_energy, rel=1e-9)


def test_deep_node_parameters():
    # the optimal node sits near r = 1e-150 here
    g = glue.optimize_nodes(Params(lam=-1.0, theta=0.5), 2)
    assert g.converged and g.node_t[0] < -300
    assert np.all(g.mismatch_ratio() <= 1e-5)


def test_leading_sign_flips_profile(std_params, glued2):
    neg = glue.glue(glued2.pieces, leading_sign=-1.0)
    assert np.array_equal(neg.solution.y, -glued2.solution.y)
    assert neg.total_energy == glued2.total_energy


def test_optimize_validation(std_params):
    with pytest.raises(ValueError):
        glue.optimize_nodes(std_params, 1)
    with pytest.raises(ValueError):
        glue.optimize_nodes(std_params, 3, init_nodes=[0.5, 0.2])
    with pytest.raises(ValueError):
        glue.optimize_nodes(std_params, 2, method="simplex")
    with pytest.raises(ValueError):
        glue.annulus_piece(std_params, -1.0, -2.0)


def test_assemble_requires_ball_first(std_params):
    a = glue.annulus_piece(std_params, -3.0, 0.0)
    with pytest.raises(ValueError):
        glue.assemble_glued([a])
