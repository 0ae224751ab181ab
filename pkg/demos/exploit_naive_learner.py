"""Train a meta-policy against a naive learner in the prisoner's dilemma.

Uses the desk GA preset (a few minutes on one core), then shows how the
opponent's policy drifts over one 100-step trajectory.
"""
import numpy as np

from opshape.experiments import hyperparameters, train_mfos_params
from opshape.games import STATES, make_game, probabilities
from opshape.learners import NaiveLearner
from opshape.mfos.policy import MetaAgent
from opshape.simulate import play

game = make_game("ipd")
hp = hyperparameters("ga", "desk")


def progress(gen, stats, elite):
    if gen % 5 == 0:
        print(f"generation {gen:3d}  best {stats['best']:.3f}  mean {stats['mean']:.3f}")


params = train_mfos_params(game, "nl", "ga", seed=0, hp=hp, callback=progress).params
traj = play(game, MetaAgent(params), NaiveLearner(), T=100, batch=512, rng=np.random.default_rng(1))
m, nl = traj.mean_returns()
print(f"\nM-FOS {m:.3f}   NL {nl:.3f}")
print("step   M-FOS P(C | init," + ",".join(STATES) + ")      NL P(C | ...)")
for t in (0, 10, 50, 99):
    pa = probabilities(traj.logits_a[:, t]).mean(0)
    pb = probabilities(traj.logits_b[:, t]).mean(0)
    print(f"{t:4d}   {np.round(pa, 2)}   {np.round(pb, 2)}")
