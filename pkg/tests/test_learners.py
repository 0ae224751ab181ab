import numpy as np
import pytest

from opshape.diffcore import central_diff, value_grad
from opshape.games import game_value, make_game, named_policy, probabilities
from opshape.learners import (LOLA_VARIANTS, LolaLearner, LookaheadBestResponder, MamlLearner,
                              NaiveLearner, labr_respond, lola_step, lola_surrogate, mmaml_train,
                              nl_step, nl_trajectory_return)
from opshape.simulate import play


def test_nl_step_is_raw_gradient_ascent():
    g = make_game("ipd")
    rng = np.random.default_rng(0)
    own, opp = rng.standard_normal(5), rng.standard_normal(5)
    expected = own + 1.0 * 25.0 * value_grad(g, own, opp, "a", "a")
    np.testing.assert_allclose(nl_step(g, own, opp), expected)
    np.testing.assert_allclose(nl_step(g, own, opp, lr=0.0), own)


def test_nl_step_uses_seat_learning_rate():
    g = make_game("ipd", lr_a=0.5, lr_b=2.0)
    rng = np.random.default_rng(1)
    own, opp = rng.standard_normal(5), rng.standard_normal(5)
    step_b = nl_step(g.swap(), opp, own) - opp
    assert np.allclose(step_b, 2.0 * 25.0 * value_grad(g, own, opp, "b", "b"))


@pytest.mark.parametrize("variant", LOLA_VARIANTS)
def test_lola_with_blind_opponent_model_is_naive(variant):
    g = make_game("ipd")
    rng = np.random.default_rng(2)
    own, opp = rng.standard_normal(5), rng.standard_normal(5)
    np.testing.assert_allclose(lola_step(g, own, opp, lr_opp=0.0, variant=variant),
                               nl_step(g, own, opp), atol=1e-9)


@pytest.mark.parametrize("variant", LOLA_VARIANTS)
@pytest.mark.parametrize("name", ["ipd", "imp", "chicken"])
def test_lola_direction_matches_surrogate_fd(variant, name):
    g = make_game(name)
    rng = np.random.default_rng(3)
    own, opp = rng.standard_normal(5), rng.standard_normal(5)
    lr = 0.3
    step = (lola_step(g, own, opp, lr_own=1.0, lr_opp=lr, variant=variant) - own) / g.grad_scale
    fd = central_diff(lambda x: lola_surrogate(g, x, opp, lr_opp=lr, variant=variant, anchor_own=own),
                      own, 1e-5)
    np.testing.assert_allclose(step, fd, rtol=1e-4, atol=1e-7)


def test_unknown_lola_variant():
    with pytest.raises(ValueError, match="taylor"):
        lola_step(make_game("ipd"), np.zeros(5), np.zeros(5), variant="second-order")


def test_labr_defects_against_defector_and_cooperates_with_tft():
    g = make_game("ipd")
    rng = np.random.default_rng(4)
    vs_alld = labr_respond(g, named_policy("alld"), rng, steps=300)
    assert probabilities(vs_alld)[0] < 0.1
    vs_tft = labr_respond(g, named_policy("tft")[None].repeat(8, 0), rng, steps=300)
    va, _ = game_value(g, vs_tft, named_policy("tft"))
    assert np.all(va > -1.1)


def test_nl_pair_converges_to_defection():
    g = make_game("ipd")
    traj = play(g, NaiveLearner(), NaiveLearner(), 100, 256, np.random.default_rng(5))
    va, vb = traj.mean_returns()
    assert -2.05 <= va <= -1.85 and -2.05 <= vb <= -1.85
    assert traj.values_a[:, -1].mean() < -1.95


def test_lola_pair_cooperates_more_than_nl():
    g = make_game("ipd")
    traj = play(g, LolaLearner(), LolaLearner(), 100, 128, np.random.default_rng(6))
    assert traj.mean_returns()[0] > -1.4


def test_maml_learner_starts_from_its_initializer():
    g = make_game("ipd")
    init = np.arange(5.0) / 10
    m = MamlLearner(init)
    out = m.initial(g, np.zeros((3, 5)))
    assert out.shape == (3, 5) and np.allclose(out, init)
    with pytest.raises(ValueError):
        m.initial(make_game("chicken", horizon="one-shot"), np.zeros((3, 1)))


def test_nl_trajectory_return_matches_simulator():
    g = make_game("ipd")
    rng = np.random.default_rng(7)
    own0, opp0 = rng.standard_normal((16, 5)), rng.standard_normal((16, 5))
    direct = nl_trajectory_return(g, own0, opp0, 30)
    traj = play(g, NaiveLearner(), NaiveLearner(), 30, 16, inits=(own0, opp0))
    np.testing.assert_allclose(direct, traj.values_a.mean(-1), rtol=1e-10)


def test_mmaml_improves_its_objective():
    g = make_game("ipd")
    opp = np.random.default_rng(8).standard_normal((16, 5))
    res = mmaml_train(g, np.random.default_rng(9), T=20, iters=25, batch=16, adam_lr=0.1,
                      opponent_inits=opp)
    assert res.history[-1] > res.history[0] + 0.05
    assert res.init_logits.shape == (5,)


def test_lookahead_responder_flag():
    assert LookaheadBestResponder.lookahead and not NaiveLearner.lookahead
