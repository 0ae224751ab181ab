"""
Meta-game simulator: T inner episodes between two agents.

Ordering per meta-step t (both seats update from the same step-t pair):

1. both sides play (own_t, opp_t); record exact values;
2. each side computes its step-(t+1) policy from (own_t, opp_t);
3. a look-ahead side instead responds to the other side's step-(t+1) policy.

Agents are anything with ``initial(game, z)`` and ``update(game, own, opp, rng)``
(look-ahead agents: ``respond(game, announced, rng)``), always called with
the game seen from their own seat.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import GameSpec, game_value


@dataclass
class Trajectory:
    """Recorded meta-episode(s); leading axes are the batch shape.

    ``logits_a[..., t, :]`` / ``logits_b`` are the policies played at meta-step t
    (each in its owner's state order); ``values_a[..., t]`` / ``values_b`` the
    normalized inner returns. ``next_a`` / ``next_b`` are the logits produced
    by the last update (meta-step T) and ``final_a`` / ``final_b`` their value
    when requested; neither is part of the reported returns.
    """

    logits_a: np.ndarray
    logits_b: np.ndarray
    values_a: np.ndarray
    values_b: np.ndarray
    final_a: np.ndarray | None = None
    final_b: np.ndarray | None = None
    next_a: np.ndarray | None = None
    next_b: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.values_a.shape[-1]

    def mean_returns(self):
        """Per-step returns averaged over meta-steps and batch."""
        return float(self.values_a.mean()), float(self.values_b.mean())

    def swapped(self) -> "Trajectory":
        return Trajectory(self.logits_b, self.logits_a, self.values_b, self.values_a,
                          self.final_b, self.final_a, self.next_b, self.next_a)


def play(game: GameSpec, agent_a, agent_b, T: int = 100, batch=(), rng=None, inits=None,
         record_logits: bool = True, final_value: bool = False) -> Trajectory:
    """Run one batch of meta-episodes.

    ``inits`` is an optional pair of standard-normal draws (each broadcastable
    to ``batch + (n,)``); otherwise they are drawn from ``rng`` (a then b).
    Agents map the draws to starting logits (learned initializers ignore them).
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if getattr(agent_a, "lookahead", False) and getattr(agent_b, "lookahead", False):
        raise ValueError("at most one side can be a look-ahead responder")
    rng = np.random.default_rng() if rng is None else rng
    batch = (batch,) if np.isscalar(batch) else tuple(batch)
    n = game.n_params
    if inits is None:
        za = rng.standard_normal(batch + (n,))
        zb = rng.standard_normal(batch + (n,))
    else:
        za, zb = (np.asarray(z, dtype=float) for z in inits)
    seat_b = game.swap()
    a = agent_a.initial(game, za)
    b = agent_b.initial(seat_b, zb)
    shape = np.broadcast_shapes(a.shape, b.shape)
    a = np.broadcast_to(a, shape).copy()
    b = np.broadcast_to(b, shape).copy()
    if getattr(agent_b, "lookahead", False):
        b = agent_b.respond(seat_b, a, rng)
    elif getattr(agent_a, "lookahead", False):
        a = agent_a.respond(game, b, rng)

    lead = shape[:-1]
    va = np.empty(lead + (T,))
    vb = np.empty(lead + (T,))
    la = np.empty(lead + (T, n)) if record_logits else None
    lb = np.empty(lead + (T, n)) if record_logits else None
    for t in range(T):
        va[..., t], vb[..., t] = game_value(game, a, b)
        if record_logits:
            la[..., t, :] = a
            lb[..., t, :] = b
        if getattr(agent_b, "lookahead", False):
            a_next = agent_a.update(game, a, b, rng)
            b_next = agent_b.respond(seat_b, a_next, rng)
        elif getattr(agent_a, "lookahead", False):
            b_next = agent_b.update(seat_b, b, a, rng)
            a_next = agent_a.respond(game, b_next, rng)
        else:
            b_next = agent_b.update(seat_b, b, a, rng)
            a_next = agent_a.update(game, a, b, rng)
        a, b = a_next, b_next
    traj = Trajectory(la, lb, va, vb, next_a=a, next_b=b)
    if final_value:
        traj.final_a, traj.final_b = game_value(game, a, b)
    return traj
