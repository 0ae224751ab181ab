"""
Two-player 2x2 matrix games and their exact expected values.

Iterated games use memory-1 policies with five logits: the cooperation
logit for the first round followed by the cooperation logits conditioned
on the previous joint action, ordered (CC, CD, DC, DD) from the owner's
point of view. One-shot games use a single logit.

Values are computed exactly (no sampling) and normalized by (1 - gamma),
so they read as average per-round payoffs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

ITERATED = "iterated"
ONE_SHOT = "one-shot"

# Agent b's conditionals re-indexed into agent a's state order: from b's
# side the joint action (a=C, b=D) is "I played D, they played C".
B_PERM = np.array([0, 1, 3, 2, 4])

STATES = ("CC", "CD", "DC", "DD")

# 32 deterministic memory-1 strategies, as +/-40 logits (saturated sigmoid).
CORNER_LOGIT = 40.0


def sigmoid(x):
    return expit(x)


def joint(x, y):
    """Joint-action distribution (CC, CD, DC, DD) from two cooperation probs."""
    return np.stack([x * y, x * (1 - y), (1 - x) * y, (1 - x) * (1 - y)], axis=-1)


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A 2x2 game.

    ``payoff_a[i, j]`` is agent a's payoff when a plays i and b plays j;
    ``payoff_b[i, j]`` is agent b's payoff when b plays i and a plays j.
    Action 0 is C (cooperate / swerve / heads), action 1 is D.
    """

    name: str
    payoff_a: np.ndarray
    payoff_b: np.ndarray
    discount: float = 0.96
    horizon: str = ITERATED
    lr_a: float = 1.0
    lr_b: float = 1.0
    symmetric: bool = field(default=False)

    def __post_init__(self):
        pa = np.asarray(self.payoff_a, dtype=float)
        pb = np.asarray(self.payoff_b, dtype=float)
        if pa.shape != (2, 2) or pb.shape != (2, 2):
            raise ValueError(f"payoff matrices must be 2x2, got {pa.shape} and {pb.shape}")
        if self.horizon not in (ITERATED, ONE_SHOT):
            raise ValueError(f"horizon must be {ITERATED!r} or {ONE_SHOT!r}, got {self.horizon!r}")
        if self.horizon == ITERATED and not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        if self.lr_a <= 0 or self.lr_b <= 0:
            raise ValueError("inner learning rates must be positive")
        pa.setflags(write=False)
        pb.setflags(write=False)
        object.__setattr__(self, "payoff_a", pa)
        object.__setattr__(self, "payoff_b", pb)
        object.__setattr__(self, "symmetric", bool(np.array_equal(pa, pb)))

    @property
    def n_params(self) -> int:
        return 5 if self.horizon == ITERATED else 1

    @property
    def grad_scale(self) -> float:
        """Factor turning the normalized value into the raw discounted sum.

        Inner learners ascend the raw discounted return, so their steps are
        ``lr * grad_scale * d(value)``.
        """
        if self.horizon == ITERATED:
            return 1.0 / (1.0 - self.discount)
        return 1.0

    @property
    def reward_a(self) -> np.ndarray:
        """Agent a's payoff per joint action, in (CC, CD, DC, DD) order."""
        return self.payoff_a.reshape(4)

    @property
    def reward_b(self) -> np.ndarray:
        """Agent b's payoff per joint action, in agent a's (CC, CD, DC, DD) order."""
        return self.payoff_b.T.reshape(4)

    def swap(self) -> "GameSpec":
        """The same game seen from agent b's seat."""
        return replace(self, payoff_a=self.payoff_b, payoff_b=self.payoff_a,
                       lr_a=self.lr_b, lr_b=self.lr_a)

    def payoff_bounds(self, agent: str = "a") -> tuple[float, float]:
        m = self.payoff_a if agent == "a" else self.payoff_b
        return float(m.min()), float(m.max())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "payoff_a": self.payoff_a.tolist(),
            "payoff_b": self.payoff_b.tolist(),
            "discount": self.discount,
            "horizon": self.horizon,
            "lr_a": self.lr_a,
            "lr_b": self.lr_b,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GameSpec":
        d = dict(d)
        d.pop("symmetric", None)
        return cls(**d)

    def __repr__(self):
        return (f"GameSpec({self.name!r}, horizon={self.horizon!r}, discount={self.discount}, "
                f"lr=({self.lr_a}, {self.lr_b}))")


_PD = [[-1.0, -3.0], [0.0, -2.0]]
_MP = [[1.0, -1.0], [-1.0, 1.0]]
_CHICKEN = [[0.0, -1.0], [1.0, -100.0]]

GAMES = {
    "ipd": dict(payoff_a=_PD, payoff_b=_PD, discount=0.96, horizon=ITERATED, lr_a=1.0, lr_b=1.0),
    "imp": dict(payoff_a=_MP, payoff_b=(-np.asarray(_MP).T).tolist(), discount=0.96,
                horizon=ITERATED, lr_a=0.1, lr_b=0.1),
    "chicken": dict(payoff_a=_CHICKEN, payoff_b=_CHICKEN, discount=0.96, horizon=ITERATED,
                    lr_a=1.0, lr_b=1.0),
}


class UnknownGameError(KeyError):
    pass


def make_game(name: str, **overrides) -> GameSpec:
    """Build one of the registered games ("ipd", "imp", "chicken").

    Keyword overrides replace any GameSpec field, e.g.
    ``make_game("chicken", horizon="one-shot")``.
    """
    key = name.lower()
    if key not in GAMES:
        raise UnknownGameError(f"unknown game {name!r}; valid games: {', '.join(sorted(GAMES))}")
    kwargs = dict(GAMES[key])
    kwargs.update(overrides)
    return GameSpec(name=key, **kwargs)


def load_game(path: str | Path) -> GameSpec:
    """Read a custom game from a JSON document.

    The document may name a registered game under ``"base"`` and override
    individual fields, or give every GameSpec field explicitly.
    """
    d = json.loads(Path(path).read_text())
    base = d.pop("base", None)
    if base is not None:
        return make_game(base, **d)
    return GameSpec.from_dict(d)


def init_policy(game: GameSpec, rng: np.random.Generator, size=()) -> np.ndarray:
    """Standard-normal logits of shape ``size + (game.n_params,)``."""
    size = (size,) if np.isscalar(size) else tuple(size)
    return rng.standard_normal(size + (game.n_params,))


def _check(game, la, lb):
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    n = game.n_params
    if la.shape[-1:] != (n,) or lb.shape[-1:] != (n,):
        raise ValueError(
            f"{game.name} ({game.horizon}) expects policies with {n} logits, "
            f"got shapes {la.shape} and {lb.shape}")
    return la, lb


class Chain:
    """Markov chain over joint actions induced by a policy pair.

    Holds everything the value and its derivatives need: the cooperation
    probabilities (b's already permuted into a's state order), the initial
    distribution ``p0``, the transition matrix ``P``, the resolvent
    ``M = (I - gamma P)^-1`` and ``y = p0^T M``.
    """

    def __init__(self, game: GameSpec, la, lb):
        la, lb = _check(game, la, lb)
        self.game = game
        self.qa = sigmoid(la)
        self.qb_own = sigmoid(lb)
        if game.horizon == ONE_SHOT:
            self.pa = self.qa
            self.pb = self.qb_own
            self.p0 = joint(self.pa[..., 0], self.pb[..., 0])
            return
        self.pa = self.qa
        self.pb = self.qb_own[..., B_PERM]
        self.p0 = joint(self.pa[..., 0], self.pb[..., 0])
        self.P = joint(self.pa[..., 1:], self.pb[..., 1:])
        g = game.discount
        self.M = np.linalg.inv(np.eye(4) - g * self.P)
        self.y = np.einsum("...i,...ij->...j", self.p0, self.M)

    def z(self, r):
        """``M r``: discounted future reward from each joint action."""
        if self.game.horizon == ONE_SHOT:
            return np.broadcast_to(r, self.p0.shape)
        return self.M @ r

    def value(self, r):
        if self.game.horizon == ONE_SHOT:
            return self.p0 @ r
        return (1 - self.game.discount) * np.einsum("...i,...i->...", self.p0, self.M @ r)

    def visitation(self):
        """Normalized discounted state-visitation ``(1 - gamma) p0^T M``."""
        if self.game.horizon == ONE_SHOT:
            return self.p0
        return (1 - self.game.discount) * self.y


def game_value(game: GameSpec, la, lb):
    """Exact normalized values ``(v_a, v_b)`` of a (batch of) policy pair(s)."""
    ch = Chain(game, la, lb)
    return ch.value(game.reward_a), ch.value(game.reward_b)


def probabilities(logits) -> np.ndarray:
    return sigmoid(np.asarray(logits, dtype=float))


def logits_from_probs(p, clip: float = CORNER_LOGIT) -> np.ndarray:
    """Inverse sigmoid, with 0/1 mapped to -/+ ``clip``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(p) - np.log1p(-p)
    return np.clip(out, -clip, clip)


def corner_strategies(game: GameSpec) -> np.ndarray:
    """All deterministic policies as saturated logits (32 for iterated games)."""
    n = game.n_params
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n)[::-1]) & 1
    return np.where(bits == 1, CORNER_LOGIT, -CORNER_LOGIT).astype(float)


def named_policy(name: str) -> np.ndarray:
    """Classic memory-1 strategies as saturated logits."""
    probs = {
        "tft": [1, 1, 0, 1, 0],
        "alld": [0, 0, 0, 0, 0],
        "allc": [1, 1, 1, 1, 1],
        "wsls": [1, 1, 0, 0, 1],
    }
    if name not in probs:
        raise KeyError(f"unknown named policy {name!r}; known: {', '.join(probs)}")
    return logits_from_probs(np.array(probs[name], dtype=float))
