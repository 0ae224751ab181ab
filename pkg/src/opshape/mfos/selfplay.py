"""
Meta-self-play: one shared meta-policy trained against a mixture of fresh
naive learners (weight lambda) and a mirrored copy of itself, with lambda
annealed over training.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..games import GameSpec
from ..learners import NaiveLearner
from ..simulate import play
from .ga import GAConfig, ga_train, population_fitness, split_genome
from .policy import MetaAgent
from .ppo import MIRROR, PPOConfig, ppo_train

log = logging.getLogger(__name__)


@dataclass
class SelfPlayConfig:
    """Linear lambda schedule: ``start`` to ``end`` over the first
    ``anneal_fraction`` of training, then held at ``end``."""

    start: float = 1.0
    end: float = 0.0
    anneal_fraction: float = 1.0

    def validate(self):
        if not (0 <= self.start <= 1 and 0 <= self.end <= 1):
            raise ValueError("lambda endpoints must lie in [0, 1]")
        if not 0 <= self.anneal_fraction <= 1:
            raise ValueError("anneal_fraction must lie in [0, 1]")

    def lam(self, progress: float) -> float:
        if self.anneal_fraction == 0:
            return self.end
        f = min(max(progress, 0.0) / self.anneal_fraction, 1.0)
        return self.start + (self.end - self.start) * f


def mirror_fitness(game: GameSpec, template, genomes, T: int, batch: int, seed: int,
                   chunk: int = 64):
    """Mean return of each genome playing a copy of itself, averaged over both seats."""
    genomes = np.atleast_2d(genomes)
    out = np.empty(len(genomes))
    for lo in range(0, len(genomes), chunk):
        actors, inits = split_genome(template, genomes[lo:lo + chunk])
        a = MetaAgent(template, deterministic=True, actor=actors, init_logits=inits)
        b = MetaAgent(template, deterministic=True, actor=actors, init_logits=inits)
        traj = play(game, a, b, T, batch, np.random.default_rng(seed), record_logits=False)
        out[lo:lo + chunk] = 0.5 * (traj.values_a.mean(axis=(-1, -2)) + traj.values_b.mean(axis=(-1, -2)))
    return out


def selfplay_ga(game: GameSpec, rng: np.random.Generator, cfg: GAConfig | None = None,
                schedule: SelfPlayConfig | None = None, callback=None):
    """GA self-play. Fitness is ``lam * (return vs NL) + (1 - lam) * (mirror return)``,
    each term on its own common-random-number batch; a term with zero weight
    is skipped."""
    cfg = cfg or GAConfig()
    schedule = schedule or SelfPlayConfig()
    schedule.validate()
    nl = NaiveLearner()

    def fitness(game, template, genomes, cfg, seed, progress):
        lam = schedule.lam(progress)
        total = np.zeros(len(genomes))
        if lam > 0:
            total += lam * population_fitness(game, template, genomes, lambda a, i: nl, cfg.T,
                                              cfg.batch, seed, cfg.chunk)
        if lam < 1:
            total += (1 - lam) * mirror_fitness(game, template, genomes, cfg.T, cfg.batch,
                                                seed + 1, cfg.chunk)
        return total

    res = ga_train(game, None, rng, cfg, callback=callback, fitness=fitness)
    res.params.meta.update(selfplay=asdict(schedule))
    return res


def selfplay_ppo(game: GameSpec, rng: np.random.Generator, cfg: PPOConfig | None = None,
                 schedule: SelfPlayConfig | None = None, callback=None):
    """PPO self-play. Each rollout independently faces a fresh NL with
    probability lambda or the mirrored policy otherwise; mirrored rollouts
    contribute both seats' transitions."""
    cfg = cfg or PPOConfig()
    schedule = schedule or SelfPlayConfig()
    schedule.validate()
    nl = NaiveLearner()

    def opponent_for(u, rng):
        n_nl = int(rng.binomial(cfg.batch, schedule.lam(u / cfg.updates)))
        return [(nl, n_nl), (MIRROR, cfg.batch - n_nl)]

    res = ppo_train(game, opponent_for, rng, cfg, callback=callback)
    res.params.meta.update(selfplay=asdict(schedule))
    return res


def selfplay_train(game: GameSpec, optimizer: str, rng: np.random.Generator, cfg=None,
                   schedule: SelfPlayConfig | None = None, callback=None):
    if optimizer == "ga":
        return selfplay_ga(game, rng, cfg, schedule, callback)
    if optimizer == "ppo":
        return selfplay_ppo(game, rng, cfg, schedule, callback)
    raise ValueError(f"unknown optimizer {optimizer!r}; expected 'ga' or 'ppo'")
