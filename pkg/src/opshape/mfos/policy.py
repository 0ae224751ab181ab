"""
Feed-forward meta-policy: observed policy pair -> Gaussian over next logits.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..games import GameSpec, sigmoid

HIDDEN = 256
LOG_2PI = np.log(2 * np.pi)


class MLP:
    """One-hidden-layer tanh network over a flat parameter vector.

    Layout of ``theta``: W1 (n_in x hidden), b1, W2 (hidden x n_out), b2.
    Leading axes of ``theta`` act as a population axis aligned with the
    leading axes of the input (which carries one extra batch axis).
    """

    def __init__(self, n_in: int, n_hidden: int, n_out: int):
        self.n_in, self.n_hidden, self.n_out = n_in, n_hidden, n_out
        sizes = [n_in * n_hidden, n_hidden, n_hidden * n_out, n_out]
        self.offsets = np.cumsum([0] + sizes)
        self.size = int(self.offsets[-1])

    def init(self, rng: np.random.Generator, out_scale: float = 1.0, size=()) -> np.ndarray:
        """Uniform(+-1/sqrt(fan_in)) weights and biases; output layer times ``out_scale``."""
        size = (size,) if np.isscalar(size) else tuple(size)
        theta = np.empty(size + (self.size,))
        k1 = 1 / np.sqrt(self.n_in)
        k2 = 1 / np.sqrt(self.n_hidden)
        o = self.offsets
        theta[..., o[0]:o[2]] = rng.uniform(-k1, k1, size + (o[2] - o[0],))
        theta[..., o[2]:o[4]] = out_scale * rng.uniform(-k2, k2, size + (o[4] - o[2],))
        return theta

    def unpack(self, theta):
        o = self.offsets
        lead = theta.shape[:-1]
        W1 = theta[..., o[0]:o[1]].reshape(lead + (self.n_in, self.n_hidden))
        b1 = theta[..., o[1]:o[2]][..., None, :]
        W2 = theta[..., o[2]:o[3]].reshape(lead + (self.n_hidden, self.n_out))
        b2 = theta[..., o[3]:o[4]][..., None, :]
        return W1, b1, W2, b2

    def forward(self, theta, x):
        W1, b1, W2, b2 = self.unpack(np.asarray(theta))
        h = np.tanh(x @ W1 + b1)
        return h @ W2 + b2, h

    def backward(self, theta, x, h, dout):
        """Gradient of ``sum(dout * forward(theta, x))`` w.r.t. a single ``theta``.

        ``x`` is (B, n_in), ``h`` the cached hidden activations, ``dout`` (B, n_out).
        """
        _, _, W2, _ = self.unpack(np.asarray(theta))
        dpre = (dout @ W2.T) * (1 - h * h)
        return np.concatenate([
            (x.T @ dpre).ravel(),
            dpre.sum(axis=0),
            (h.T @ dout).ravel(),
            dout.sum(axis=0),
        ])


@dataclass
class MetaPolicyParams:
    """Actor (and optional critic) weights of a meta-policy for one game shape.

    ``init_logits`` is set for the learned-initial-policy variant: the
    meta-agent then starts every meta-episode from it instead of a random
    draw.
    """

    n_params: int
    actor: np.ndarray
    log_std: np.ndarray
    critic: np.ndarray | None = None
    init_logits: np.ndarray | None = None
    hidden: int = HIDDEN
    meta: dict = field(default_factory=dict)

    @property
    def obs_dim(self) -> int:
        return 2 * self.n_params

    @property
    def actor_net(self) -> MLP:
        return MLP(self.obs_dim, self.hidden, self.n_params)

    @property
    def critic_net(self) -> MLP:
        return MLP(self.obs_dim, self.hidden, 1)

    def copy(self, **changes) -> "MetaPolicyParams":
        out = replace(self, **changes)
        for name in ("actor", "log_std", "critic", "init_logits"):
            v = getattr(out, name)
            if v is not None:
                setattr(out, name, np.array(v, dtype=float))
        out.meta = dict(out.meta)
        return out


def new_meta_policy(game: GameSpec, rng: np.random.Generator, hidden: int = HIDDEN,
                    critic: bool = False, learn_init: bool = False,
                    out_scale: float = 1.0) -> MetaPolicyParams:
    n = game.n_params
    actor = MLP(2 * n, hidden, n).init(rng, out_scale=out_scale)
    crit = MLP(2 * n, hidden, 1).init(rng) if critic else None
    init = rng.standard_normal(n) if learn_init else None
    return MetaPolicyParams(n, actor, np.zeros(n), crit, init, hidden)


def observation(own, opp):
    """Meta-observation: own probabilities followed by the opponent's (own state order each)."""
    return np.concatenate([sigmoid(own), sigmoid(opp)], axis=-1)


def meta_policy_act(params: MetaPolicyParams, obs, rng=None, deterministic: bool = False,
                    actor=None):
    """Next-policy logits for each observation.

    Deterministic mode returns the network mean; otherwise each coordinate
    is drawn from N(mean, exp(log_std)^2). ``actor`` overrides the actor
    weights (e.g. a population of them, one per leading index of ``obs``).
    """
    theta = params.actor if actor is None else actor
    obs = np.asarray(obs, dtype=float)
    squeeze = obs.ndim == 1
    if squeeze:
        obs = obs[None]
    mean, _ = params.actor_net.forward(theta, obs)
    if not np.all(np.isfinite(mean)):
        raise FloatingPointError("non-finite meta-policy output")
    if not deterministic:
        if rng is None:
            raise ValueError("stochastic action needs an rng")
        mean = mean + np.exp(params.log_std) * rng.standard_normal(mean.shape)
    return mean[0] if squeeze else mean


def gaussian_log_prob(actions, mean, log_std):
    z = (actions - mean) * np.exp(-log_std)
    return (-0.5 * z * z - log_std - 0.5 * LOG_2PI).sum(axis=-1)


class MetaAgent:
    """Adapter letting a meta-policy sit in a seat of :func:`opshape.simulate.play`.

    ``actor`` may hold a population of actor weights (shape ``(pop, D)``);
    states then carry a leading population axis.
    """

    lookahead = False
    name = "mfos"

    def __init__(self, params: MetaPolicyParams, deterministic: bool = True, actor=None,
                 init_logits=None):
        self.params = params
        self.deterministic = deterministic
        self.actor = params.actor if actor is None else actor
        self.init_logits = params.init_logits if init_logits is None else init_logits

    def initial(self, game, z):
        if self.init_logits is None:
            if self.actor.ndim > 1:
                return np.broadcast_to(z, self.actor.shape[:-1] + np.shape(z)).copy()
            return z
        init = np.asarray(self.init_logits, dtype=float)
        if init.ndim > 1:
            init = init.reshape(init.shape[:-1] + (1,) * (np.ndim(z) - 1) + init.shape[-1:])
        return np.broadcast_to(init, np.broadcast_shapes(init.shape, np.shape(z))).copy()

    def update(self, game, own, opp, rng=None):
        return meta_policy_act(self.params, observation(own, opp), rng, self.deterministic,
                               actor=self.actor)

    def describe(self):
        return {"kind": self.name, **{k: v for k, v in self.params.meta.items() if k != "history"}}
