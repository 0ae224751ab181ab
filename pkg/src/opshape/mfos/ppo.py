"""
PPO for the meta-policy: Gaussian actor over next-policy logits with a
state-independent log-std, separate critic, clipped surrogate with an
entropy bonus, and plain discounted-return-minus-baseline advantages.
All gradients are written out by hand for the one-hidden-layer networks.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..games import GameSpec
from ..optim import Adam
from ..simulate import play
from .policy import HIDDEN, MetaAgent, MetaPolicyParams, gaussian_log_prob, new_meta_policy, observation

log = logging.getLogger(__name__)

MIRROR = "mirror"


@dataclass
class PPOConfig:
    updates: int = 200
    batch: int = 512
    T: int = 100
    lr: float = 2e-4
    epochs: int = 4
    gamma: float = 0.99
    clip: float = 0.2
    entropy: float = 0.01
    minibatches: int = 1
    hidden: int = HIDDEN
    critic_lr: float | None = None

    @classmethod
    def paper(cls, **kw):
        return cls(**{**dict(batch=4096, updates=1000), **kw})

    def validate(self):
        for name in ("updates", "batch", "T", "lr", "epochs", "gamma", "minibatches"):
            if getattr(self, name) <= 0:
                raise ValueError(f"PPO {name} must be positive")
        if self.clip < 0 or self.entropy < 0:
            raise ValueError("PPO clip and entropy must be non-negative")


@dataclass
class Batch:
    """Flattened transitions: observations, sampled actions, old log-probs,
    standardized discounted returns and normalized advantages."""

    obs: np.ndarray
    actions: np.ndarray
    logp_old: np.ndarray
    returns: np.ndarray
    adv: np.ndarray

    def __len__(self):
        return len(self.obs)

    def subset(self, idx):
        return Batch(self.obs[idx], self.actions[idx], self.logp_old[idx], self.returns[idx],
                     self.adv[idx])


@dataclass
class PPOResult:
    params: MetaPolicyParams
    history: list = field(default_factory=list)


def discounted_returns(rewards, gamma):
    """Reward-to-go along the last axis."""
    out = np.empty_like(rewards)
    acc = np.zeros(rewards.shape[:-1])
    for t in range(rewards.shape[-1] - 1, -1, -1):
        acc = rewards[..., t] + gamma * acc
        out[..., t] = acc
    return out


def seat_transitions(logits_own, logits_opp, next_own, values_own, final_own):
    """(obs, action, reward) arrays for one seat of recorded meta-episodes.

    The action taken after observing step t is the step-(t+1) policy; its
    reward is the step-(t+1) inner return.
    """
    obs = observation(logits_own, logits_opp)
    actions = np.concatenate([logits_own[..., 1:, :], next_own[..., None, :]], axis=-2)
    rewards = np.concatenate([values_own[..., 1:], final_own[..., None]], axis=-1)
    return obs, actions, rewards


def make_batch(params: MetaPolicyParams, obs, actions, rewards, gamma) -> Batch:
    n_obs = obs.shape[-1]
    n_act = actions.shape[-1]
    returns = discounted_returns(rewards, gamma).reshape(-1)
    # the critic fits standardized returns so its scale never lags the game's
    returns = (returns - returns.mean()) / (returns.std() + 1e-8)
    obs = obs.reshape(-1, n_obs)
    actions = actions.reshape(-1, n_act)
    mean, _ = params.actor_net.forward(params.actor, obs)
    logp = gaussian_log_prob(actions, mean, params.log_std)
    value = critic_value(params, obs)
    adv = returns - value
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return Batch(obs, actions, logp, returns, adv)


def critic_value(params: MetaPolicyParams, obs):
    out, _ = params.critic_net.forward(params.critic, obs)
    return out[..., 0]


def surrogate_loss_and_grad(params: MetaPolicyParams, b: Batch, clip: float, entropy: float):
    """Clipped-surrogate actor loss (to minimize) and its exact gradient.

    Returns ``(loss, d loss / d actor, d loss / d log_std)``.
    """
    net = params.actor_net
    mean, h = net.forward(params.actor, b.obs)
    log_std = params.log_std
    inv_var = np.exp(-2 * log_std)
    diff = b.actions - mean
    logp = gaussian_log_prob(b.actions, mean, log_std)
    ratio = np.exp(logp - b.logp_old)
    unclipped = ratio * b.adv
    clipped = np.clip(ratio, 1 - clip, 1 + clip) * b.adv
    surr = np.minimum(unclipped, clipped)
    ent = float(np.sum(log_std + 0.5 * (1 + np.log(2 * np.pi))))
    N = len(b)
    loss = -surr.mean() - entropy * ent
    # d surr / d logp: ratio * adv where the unclipped branch is active
    active = (unclipped <= clipped) | ((ratio >= 1 - clip) & (ratio <= 1 + clip))
    dlogp = np.where(active, unclipped, 0.0) * (-1.0 / N)
    dmean = dlogp[:, None] * diff * inv_var
    dlog_std = (dlogp[:, None] * (diff * diff * inv_var - 1)).sum(axis=0) - entropy
    dactor = net.backward(params.actor, b.obs, h, dmean)
    return float(loss), dactor, dlog_std


def critic_loss_and_grad(params: MetaPolicyParams, b: Batch):
    net = params.critic_net
    out, h = net.forward(params.critic, b.obs)
    err = out[:, 0] - b.returns
    loss = float(np.mean(err * err))
    dout = (2.0 / len(b)) * err[:, None]
    return loss, net.backward(params.critic, b.obs, h, dout)


def collect(game: GameSpec, params: MetaPolicyParams, opponent, T: int, batch: int,
            rng: np.random.Generator):
    """Roll out the stochastic meta-policy; returns (obs, actions, rewards, own mean return).

    ``opponent`` is a learner or :data:`MIRROR` (both seats are the
    meta-policy and both contribute transitions).
    """
    me = MetaAgent(params, deterministic=False)
    other = MetaAgent(params, deterministic=False) if opponent == MIRROR else opponent
    traj = play(game, me, other, T, batch, rng, final_value=True)
    obs, actions, rewards = seat_transitions(traj.logits_a, traj.logits_b, traj.next_a,
                                             traj.values_a, traj.final_a)
    if opponent == MIRROR:
        ob, ab, rb = seat_transitions(traj.logits_b, traj.logits_a, traj.next_b,
                                      traj.values_b, traj.final_b)
        obs, actions, rewards = (np.concatenate(p) for p in ((obs, ob), (actions, ab), (rewards, rb)))
    return obs, actions, rewards, float(traj.values_a.mean())


def ppo_update(params: MetaPolicyParams, batch: Batch, cfg: PPOConfig, opt_actor: Adam,
               opt_critic: Adam, rng: np.random.Generator):
    stats = {}
    n = len(batch)
    for _ in range(cfg.epochs):
        idx = rng.permutation(n) if cfg.minibatches > 1 else np.arange(n)
        for part in np.array_split(idx, cfg.minibatches):
            mb = batch.subset(part)
            loss, dactor, dlog_std = surrogate_loss_and_grad(params, mb, cfg.clip, cfg.entropy)
            closs, dcritic = critic_loss_and_grad(params, mb)
            if not (np.isfinite(loss) and np.isfinite(closs)):
                raise FloatingPointError(
                    f"PPO loss is not finite (actor {loss}, critic {closs}); batch returns "
                    f"mean {batch.returns.mean():.4g} std {batch.returns.std():.4g}, "
                    f"log_std {params.log_std}")
            step = opt_actor.step(-np.concatenate([dactor, dlog_std]))
            params.actor = params.actor + step[:-params.n_params]
            params.log_std = params.log_std + step[-params.n_params:]
            params.critic = params.critic + opt_critic.step(-dcritic)
            stats = dict(actor_loss=loss, critic_loss=closs)
    return stats


def ppo_train(game: GameSpec, opponent_for, rng: np.random.Generator, cfg: PPOConfig | None = None,
              callback=None) -> PPOResult:
    """Train a meta-policy with PPO.

    ``opponent_for(update_index, rng)`` yields a list of ``(opponent, batch)``
    groups for that update: learners, or :data:`MIRROR` for self-play.
    """
    cfg = cfg or PPOConfig()
    cfg.validate()
    params = new_meta_policy(game, rng, hidden=cfg.hidden, critic=True)
    opt_actor = Adam(params.actor.size + params.n_params, lr=cfg.lr)
    opt_critic = Adam(params.critic.size, lr=cfg.critic_lr or cfg.lr)
    history = []
    for u in range(cfg.updates):
        parts, own = [], []
        for opponent, size in opponent_for(u, rng):
            if size == 0:
                continue
            obs, actions, rewards, mean_own = collect(game, params, opponent, cfg.T, size, rng)
            parts.append((obs, actions, rewards))
            own.append((mean_own, size))
        obs, actions, rewards = (np.concatenate(p) for p in zip(*parts))
        batch = make_batch(params, obs, actions, rewards, cfg.gamma)
        stats = ppo_update(params, batch, cfg, opt_actor, opt_critic, rng)
        stats.update(update=u, mean_return=float(sum(m * s for m, s in own) / sum(s for _, s in own)))
        history.append(stats)
        log.info("ppo update %d return %.4f actor %.4f critic %.4f", u, stats["mean_return"],
                 stats["actor_loss"], stats["critic_loss"])
        if callback is not None:
            callback(u, stats, params)
    params.meta.update(optimizer="ppo", ppo=asdict(cfg), deterministic=False)
    return PPOResult(params, history)
