import numpy as np
import pytest

from opshape.diffcore import (fd_cross_hessian, fd_grad, value_and_grads, value_cross_hessian,
                              value_grad)
from opshape.games import ONE_SHOT, game_value, make_game, sigmoid
from oracles import brute_force_value, central_fd, rel_err

GAMES = ["ipd", "imp", "chicken"]


@pytest.mark.parametrize("name", GAMES)
@pytest.mark.parametrize("value_of,wrt", [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")])
def test_gradient_matches_finite_differences(name, value_of, wrt):
    g = make_game(name)
    rng = np.random.default_rng(11)
    for _ in range(5):
        la, lb = rng.standard_normal(5), rng.standard_normal(5)
        exact = value_grad(g, la, lb, value_of, wrt)
        assert rel_err(exact, fd_grad(g, la, lb, value_of, wrt, h=1e-5)) < 1e-5


def test_gradient_matches_propagation_oracle():
    """FD of the independent brute-force value, not the library's own value."""
    g = make_game("ipd")
    rng = np.random.default_rng(2)
    la, lb = rng.standard_normal(5), rng.standard_normal(5)
    f = lambda x: brute_force_value(g.payoff_a, g.payoff_b, x, lb, horizon=800)[0]
    assert rel_err(value_grad(g, la, lb, "a", "a"), central_fd(f, la, 1e-5)) < 1e-5
    f = lambda x: brute_force_value(g.payoff_a, g.payoff_b, la, x, horizon=800)[0]
    assert rel_err(value_grad(g, la, lb, "a", "b"), central_fd(f, lb, 1e-5)) < 1e-5


@pytest.mark.parametrize("name", GAMES)
@pytest.mark.parametrize("value_of", ["a", "b"])
def test_cross_hessian_matches_finite_differences(name, value_of):
    g = make_game(name)
    rng = np.random.default_rng(4)
    la, lb = rng.standard_normal(5), rng.standard_normal(5)
    exact = value_cross_hessian(g, la, lb, value_of)
    assert exact.shape == (5, 5)
    assert np.max(np.abs(exact - fd_cross_hessian(g, la, lb, value_of))) < 1e-4


def test_one_shot_cross_hessian_closed_form():
    g = make_game("chicken", horizon=ONE_SHOT)
    la, lb = np.array([0.3]), np.array([-0.7])
    s = lambda x: sigmoid(x) * (1 - sigmoid(x))
    R = g.payoff_a
    curvature = R[0, 0] - R[0, 1] - R[1, 0] + R[1, 1]
    expected = s(la[0]) * s(lb[0]) * curvature
    assert value_cross_hessian(g, la, lb, "a")[0, 0] == pytest.approx(expected)
    assert value_cross_hessian(g, la, lb, "a")[0, 0] == pytest.approx(
        fd_cross_hessian(g, la, lb, "a")[0, 0], abs=1e-4)


def test_value_and_grads_bundle_is_consistent():
    g = make_game("ipd")
    rng = np.random.default_rng(8)
    la, lb = rng.standard_normal((6, 5)), rng.standard_normal((6, 5))
    d = value_and_grads(g, la, lb, cross=True)
    va, vb = game_value(g, la, lb)
    np.testing.assert_allclose(d["va"], va)
    np.testing.assert_allclose(d["vb"], vb)
    np.testing.assert_allclose(d["ga_a"], value_grad(g, la, lb, "a", "a"))
    np.testing.assert_allclose(d["gb_a"], value_grad(g, la, lb, "b", "a"))
    np.testing.assert_allclose(d["Hb"], value_cross_hessian(g, la, lb, "b"))


def test_saturated_policies_have_vanishing_gradients():
    g = make_game("ipd")
    big = np.full(5, 40.0)
    assert np.max(np.abs(value_grad(g, big, -big))) < 1e-12
