"""Opponent shaping in iterated matrix games: exact game values, learning
dynamics (naive, LOLA, M-MAML, look-ahead best response) and model-free
meta-agents trained with a genetic algorithm or PPO."""

__version__ = "0.1.0"

from .games import GameSpec, game_value, init_policy, make_game, named_policy  # noqa: E402
from .simulate import Trajectory, play  # noqa: E402

__all__ = ["GameSpec", "Trajectory", "game_value", "init_policy", "make_game", "named_policy", "play"]
