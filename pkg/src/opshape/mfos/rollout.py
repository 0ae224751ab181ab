"""Meta-episode rollouts of a meta-policy against a learner or another meta-policy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..games import GameSpec
from ..simulate import Trajectory, play
from .policy import MetaAgent, MetaPolicyParams, observation


@dataclass
class MetaTrajectory:
    """Batch of meta-episodes from the meta-agent's seat.

    ``obs[..., t, :]`` is what the meta-agent saw after inner episode t,
    ``actions[..., t, :]`` the logits it chose for episode t+1 and
    ``returns[..., t]`` the exact inner return of episode t.
    """

    obs: np.ndarray
    actions: np.ndarray
    returns: np.ndarray
    opponent_returns: np.ndarray
    raw: Trajectory

    @property
    def T(self) -> int:
        return self.returns.shape[-1]


def as_agent(opponent, deterministic: bool = True):
    if isinstance(opponent, MetaPolicyParams):
        return MetaAgent(opponent, deterministic=deterministic)
    return opponent


def meta_rollout(params: MetaPolicyParams, opponent, game: GameSpec, T: int = 100, batch: int = 1,
                 rng: np.random.Generator | None = None, deterministic: bool = False) -> MetaTrajectory:
    """Play ``batch`` meta-episodes of ``params`` (seat a) against ``opponent``.

    ``opponent`` is a learner or another :class:`MetaPolicyParams`, which then
    acts from its own seat with the same ``deterministic`` flag.
    """
    if batch < 1:
        raise ValueError("batch must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    me = MetaAgent(params, deterministic=deterministic)
    traj = play(game, me, as_agent(opponent, deterministic), T, batch, rng)
    obs = observation(traj.logits_a, traj.logits_b)
    actions = np.concatenate([traj.logits_a[..., 1:, :], traj.next_a[..., None, :]], axis=-2)
    return MetaTrajectory(obs, actions, traj.values_a, traj.values_b, traj)
