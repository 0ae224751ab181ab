"""Naive learners, LOLA, and the Chicken self-play collapse.

Run with ``python3 demos/learning_dynamics.py``; finishes in a few seconds.
"""
import numpy as np

from opshape.games import make_game, probabilities
from opshape.learners import LolaLearner, NaiveLearner
from opshape.simulate import play

PAIRS = [("ipd", NaiveLearner(), NaiveLearner(), "NL vs NL"),
         ("ipd", LolaLearner(), LolaLearner(), "LOLA vs LOLA"),
         ("ipd", LolaLearner(), NaiveLearner(), "LOLA vs NL"),
         ("chicken", LolaLearner(), LolaLearner(), "LOLA vs LOLA")]

for i, (name, a, b, label) in enumerate(PAIRS):
    traj = play(make_game(name), a, b, T=100, batch=512, rng=np.random.default_rng(i))
    va, vb = traj.mean_returns()
    coop = probabilities(traj.logits_a[:, -1]).mean(0)
    print(f"{name:8s} {label:13s} returns {va:8.3f} {vb:8.3f}   final P(C) a: {np.round(coop, 2)}")
