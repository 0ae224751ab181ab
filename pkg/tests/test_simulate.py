"""Meta-game ordering, determinism and seat symmetry."""
import numpy as np
import pytest

from opshape.games import make_game
from opshape.learners import LookaheadBestResponder, NaiveLearner, labr_respond, nl_step
from opshape.mfos.policy import MetaAgent, new_meta_policy
from opshape.simulate import play


class Scripted:
    """Plays a fixed sequence of logits, optionally overriding one step."""

    lookahead = False

    def __init__(self, seq, override=None):
        self.seq, self.override, self.t = seq, override or {}, 0

    def initial(self, game, z):
        self.t = 0
        return np.broadcast_to(self.seq[0], np.shape(z)).copy()

    def update(self, game, own, opp, rng=None):
        self.t += 1
        return np.broadcast_to(self.override.get(self.t, self.seq[self.t]), np.shape(own)).copy()


def test_opponent_update_depends_only_on_current_pair():
    g = make_game("ipd")
    rng = np.random.default_rng(0)
    seq = rng.standard_normal((11, 5))
    z = rng.standard_normal((2, 5))
    base = play(g, Scripted(seq), NaiveLearner(), 10, inits=(z[0], z[1]))
    # intervene on the scripted agent's action chosen after step 3 (its step-4 policy)
    alt = play(g, Scripted(seq, {4: -seq[4]}), NaiveLearner(), 10, inits=(z[0], z[1]))
    np.testing.assert_array_equal(base.logits_b[:5], alt.logits_b[:5])
    assert not np.allclose(base.logits_b[5], alt.logits_b[5])
    # the opponent's step-(t+1) policy is its naive step from the step-t pair
    for t in range(9):
        np.testing.assert_allclose(base.logits_b[t + 1],
                                   nl_step(g.swap(), base.logits_b[t], base.logits_a[t]))


def test_lookahead_responds_to_announced_policy():
    g = make_game("ipd")
    seq = np.random.default_rng(1).standard_normal((6, 5))
    labr = LookaheadBestResponder(steps=20)
    traj = play(g, Scripted(seq), labr, 5, rng=np.random.default_rng(2))
    # replay the responder's draws: it best-responds to each step's policy, including t=0
    rng = np.random.default_rng(2)
    rng.standard_normal(5)
    rng.standard_normal(5)
    for t in range(5):
        expected = labr_respond(g.swap(), seq[t], rng, steps=20)
        np.testing.assert_allclose(traj.logits_b[t], expected)


def test_two_lookahead_agents_rejected():
    g = make_game("ipd")
    with pytest.raises(ValueError):
        play(g, LookaheadBestResponder(), LookaheadBestResponder(), 3)
    with pytest.raises(ValueError):
        play(g, NaiveLearner(), NaiveLearner(), 0)


def test_same_seed_same_trajectory():
    g = make_game("imp")
    pol = new_meta_policy(g, np.random.default_rng(3))
    a = play(g, MetaAgent(pol, deterministic=False), NaiveLearner(), 20, 2, np.random.default_rng(4))
    b = play(g, MetaAgent(pol, deterministic=False), NaiveLearner(), 20, 2, np.random.default_rng(4))
    np.testing.assert_array_equal(a.logits_a, b.logits_a)
    np.testing.assert_array_equal(a.values_b, b.values_b)


def test_mirror_symmetry_under_seat_swap():
    g = make_game("ipd")
    p, q = (new_meta_policy(g, np.random.default_rng(s)) for s in (5, 6))
    z = np.random.default_rng(7).standard_normal((2, 8, 5))
    ab = play(g, MetaAgent(p), MetaAgent(q), 15, inits=(z[0], z[1]))
    ba = play(g, MetaAgent(q), MetaAgent(p), 15, inits=(z[1], z[0])).swapped()
    np.testing.assert_allclose(ab.logits_a, ba.logits_a, atol=1e-12)
    np.testing.assert_allclose(ab.values_b, ba.values_b, atol=1e-12)


def test_returns_stay_in_payoff_hull():
    for name in ("ipd", "imp", "chicken"):
        g = make_game(name)
        pol = new_meta_policy(g, np.random.default_rng(8))
        tr = play(g, MetaAgent(pol, deterministic=False), NaiveLearner(), 30, 16,
                  np.random.default_rng(9))
        lo, hi = g.payoff_bounds()
        assert tr.values_a.min() >= lo - 1e-9 and tr.values_a.max() <= hi + 1e-9
