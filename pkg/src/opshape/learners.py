"""
Inner-game learners: naive gradient ascent (NL), LOLA, M-MAML and the
look-ahead best responder (LABR).

Every update is written from the updating agent's seat: ``own`` is agent
a of ``game``. A learner sitting in seat b is handed ``game.swap()``.

Learners ascend the raw discounted return, i.e. the normalized value
times ``game.grad_scale``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .diffcore import central_diff, value_and_grads, value_grad
from .games import GameSpec, game_value, init_policy, probabilities
from .optim import Adam

log = logging.getLogger(__name__)

LOLA_VARIANTS = ("taylor", "exact", "literal")


def nl_step(game: GameSpec, own, opp, lr: float | None = None):
    """One naive-learner step: ``own + lr * d(raw own value)/d own``."""
    lr = game.lr_a if lr is None else lr
    return own + lr * game.grad_scale * value_grad(game, own, opp, "a", "a")


def lola_step(game: GameSpec, own, opp, lr_own: float | None = None,
              lr_opp: float | None = None, variant: str = "taylor"):
    """One LOLA step for agent a against a presumed naive opponent.

    The opponent's anticipated step is ``delta = lr_opp * d(raw v_b)/d opp``.

    ``variant`` selects how the look-ahead is differentiated:

    * ``"taylor"`` (default): first-order expansion of
      ``v_a(own, opp + delta)``, all terms at the current point,
      ``grad_own v_a + (d delta/d own)^T grad_opp v_a``.
    * ``"exact"``: total derivative of ``own -> v_a(own, opp + delta(own, opp))``;
      the own-gradient and the opponent-gradient of ``v_a`` are taken at the
      shifted point.
    * ``"literal"``: ``delta`` is the gradient of ``v_b`` w.r.t. ``own`` (the
      subscript as printed in the LOLA update); total derivative through it,
      with its Jacobian by finite differences.
    """
    lr_own = game.lr_a if lr_own is None else lr_own
    lr_opp = game.lr_b if lr_opp is None else lr_opp
    s = game.grad_scale
    own = np.asarray(own, dtype=float)
    opp = np.asarray(opp, dtype=float)
    if variant == "taylor":
        d = value_and_grads(game, own, opp, cross=True)
        shaping = np.einsum("...ij,...j->...i", d["Hb"], d["ga_b"])
        grad = d["ga_a"] + lr_opp * s * shaping
    elif variant == "exact":
        d = value_and_grads(game, own, opp, cross=True)
        shifted = opp + lr_opp * s * d["gb_b"]
        d2 = value_and_grads(game, own, shifted)
        shaping = np.einsum("...ij,...j->...i", d["Hb"], d2["ga_b"])
        grad = d2["ga_a"] + lr_opp * s * shaping
    elif variant == "literal":
        delta = lr_opp * s * value_grad(game, own, opp, "b", "a")
        shifted = opp + delta
        d2 = value_and_grads(game, own, shifted)
        jac = central_diff(lambda x: lr_opp * s * value_grad(game, x, opp, "b", "a"), own, 1e-5)
        grad = d2["ga_a"] + np.einsum("...ji,...j->...i", jac, d2["ga_b"])
    else:
        raise ValueError(f"unknown LOLA variant {variant!r}; choose from {LOLA_VARIANTS}")
    return own + lr_own * s * grad


def lola_surrogate(game: GameSpec, own, opp, lr_opp: float | None = None,
                   variant: str = "taylor", anchor_own=None):
    """Scalar whose own-gradient is the LOLA direction (scaled by 1/grad_scale).

    Used as the finite-difference target for :func:`lola_step`. For the
    Taylor variant, the opponent-gradient of ``v_a`` is frozen at
    ``anchor_own`` (defaults to ``own``).
    """
    lr_opp = game.lr_b if lr_opp is None else lr_opp
    s = game.grad_scale
    own = np.asarray(own, dtype=float)
    if variant == "exact":
        delta = lr_opp * s * value_grad(game, own, opp, "b", "b")
        return game_value(game, own, opp + delta)[0]
    if variant == "literal":
        delta = lr_opp * s * value_grad(game, own, opp, "b", "a")
        return game_value(game, own, opp + delta)[0]
    anchor = own if anchor_own is None else anchor_own
    frozen = value_grad(game, anchor, opp, "a", "b")
    delta = lr_opp * s * value_grad(game, own, opp, "b", "b")
    return game_value(game, own, opp)[0] + np.einsum("...i,...i->...", frozen, delta)


def labr_respond(game: GameSpec, announced, rng: np.random.Generator, steps: int = 1000,
                 lr: float | None = None, init=None):
    """Best response to a fixed announced opponent by exact gradient ascent.

    Starts from a fresh standard-normal policy (or ``init``) and takes
    ``steps`` naive-gradient steps against ``announced``.
    """
    announced = np.asarray(announced, dtype=float)
    own = init_policy(game, rng, announced.shape[:-1]) if init is None else np.array(init, dtype=float)
    lr = game.lr_a if lr is None else lr
    step = lr * game.grad_scale
    for _ in range(steps):
        own = own + step * value_grad(game, own, announced, "a", "a")
    return own


# ---------------------------------------------------------------------------
# Learner objects used by the meta-game simulator.
#
# ``initial(game, z)`` maps a standard-normal draw ``z`` to the starting
# logits; ``update(game, own, opp, rng)`` returns the next own logits.
# Learners with ``lookahead`` set instead get ``respond(game, announced, rng)``
# with the opponent's upcoming policy.
# ---------------------------------------------------------------------------


class Learner:
    name = "learner"
    lookahead = False

    def initial(self, game: GameSpec, z):
        return z

    def update(self, game: GameSpec, own, opp, rng):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.name}


class NaiveLearner(Learner):
    name = "nl"

    def update(self, game, own, opp, rng=None):
        return nl_step(game, own, opp)


@dataclass
class LolaLearner(Learner):
    variant: str = "taylor"
    name = "lola"

    def update(self, game, own, opp, rng=None):
        return lola_step(game, own, opp, variant=self.variant)

    def describe(self):
        return {"kind": self.name, "variant": self.variant}


@dataclass
class MamlLearner(Learner):
    """Naive learner starting from a meta-learned initial policy."""

    init_logits: np.ndarray = field(default=None)
    name = "mmaml"

    def initial(self, game, z):
        init = np.asarray(self.init_logits, dtype=float)
        if init.shape != (game.n_params,):
            raise ValueError(f"M-MAML initializer has shape {init.shape}, game needs ({game.n_params},)")
        return np.broadcast_to(init, np.shape(z)).copy()

    def update(self, game, own, opp, rng=None):
        return nl_step(game, own, opp)

    def describe(self):
        return {"kind": self.name, "init_logits": np.asarray(self.init_logits).tolist()}


@dataclass
class LookaheadBestResponder(Learner):
    steps: int = 1000
    name = "labr"
    lookahead = True

    def respond(self, game, announced, rng):
        return labr_respond(game, announced, rng, steps=self.steps)

    def describe(self):
        return {"kind": self.name, "steps": self.steps}


# ---------------------------------------------------------------------------
# M-MAML
# ---------------------------------------------------------------------------


def nl_trajectory_return(game: GameSpec, own0, opp0, T: int):
    """Mean per-step own value when both sides run naive learning from (own0, opp0)."""
    own, opp = np.asarray(own0, dtype=float), np.asarray(opp0, dtype=float)
    swapped = game.swap()
    total = np.zeros(np.broadcast_shapes(own.shape, opp.shape)[:-1])
    for _ in range(T):
        d = value_and_grads(game, own, opp)
        total = total + d["va"]
        own, opp = (own + game.lr_a * game.grad_scale * d["ga_a"],
                    opp + swapped.lr_a * game.grad_scale * d["gb_b"])
    if not np.all(np.isfinite(total)):
        raise FloatingPointError(
            f"non-finite M-MAML trajectory return (init={np.asarray(own0).reshape(-1)[:5]}, "
            f"{np.count_nonzero(~np.isfinite(total))} bad rollouts)")
    return total / T


@dataclass
class MamlResult:
    init_logits: np.ndarray
    history: list
    config: dict


def mmaml_train(game: GameSpec, rng: np.random.Generator, T: int = 100, adam_lr: float = 0.05,
                batch: int = 64, iters: int = 300, h: float = 1e-3, init=None,
                opponent_inits=None) -> MamlResult:
    """Meta-learn an initial policy for naive-learning dynamics.

    Maximizes the batch-mean of the per-step own value along a T-step
    trajectory in which both sides are naive learners, over fresh
    standard-normal opponent initializations. The gradient with respect
    to the initial logits is a central difference over each coordinate
    (2 * n rollouts per opponent draw), ascended with Adam.

    ``opponent_inits`` fixes the opponent draws (shape ``(batch, n)``)
    for every iteration instead of resampling.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    n = game.n_params
    theta = init_policy(game, rng) if init is None else np.array(init, dtype=float)
    opt = Adam(theta.shape, lr=adam_lr)
    eye = np.eye(n) * h
    history = []
    for it in range(iters):
        opp0 = (rng.standard_normal((batch, n)) if opponent_inits is None
                else np.asarray(opponent_inits, dtype=float))
        perturbed = np.concatenate([theta + eye, theta - eye])       # (2n, n)
        own0 = np.broadcast_to(perturbed[:, None, :], (2 * n, opp0.shape[0], n))
        ret = nl_trajectory_return(game, own0, opp0[None], T).mean(axis=1)
        grad = (ret[:n] - ret[n:]) / (2 * h)
        objective = 0.5 * float(ret[:n].mean() + ret[n:].mean())
        history.append(objective)
        theta = theta + opt.step(grad)
        if it % 50 == 0:
            log.debug("mmaml iter %d objective %.4f probs %s", it, objective,
                      np.round(probabilities(theta), 3))
    config = dict(T=T, adam_lr=adam_lr, batch=batch, iters=iters, h=h)
    return MamlResult(theta, history, config)
