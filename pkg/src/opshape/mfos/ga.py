"""
Mutation-only genetic algorithm over meta-policy actor weights.

Each generation scores every individual on the same batch of meta-episode
initializations (common random numbers), keeps the elites unchanged and
fills the rest with Gaussian-perturbed copies of parents drawn uniformly
from the top ``truncation`` individuals.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..games import GameSpec
from ..simulate import play
from .policy import HIDDEN, MetaAgent, MetaPolicyParams, new_meta_policy

log = logging.getLogger(__name__)


@dataclass
class GAConfig:
    pop: int = 256
    batch: int = 32
    generations: int = 40
    sigma: float = 2.0
    elites: int = 1
    truncation: int = 32
    T: int = 100
    hidden: int = HIDDEN
    learn_init: bool = False
    chunk: int = 64

    @classmethod
    def paper(cls, **kw):
        return cls(**{**dict(pop=2048, batch=128, generations=200), **kw})

    def validate(self):
        if not self.pop > self.elites >= 1:
            raise ValueError(f"need pop > elites >= 1, got pop={self.pop}, elites={self.elites}")
        if not 1 <= self.truncation <= self.pop:
            raise ValueError("truncation must lie in [1, pop]")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass
class GAResult:
    params: MetaPolicyParams
    history: list = field(default_factory=list)


def _genome_size(template: MetaPolicyParams) -> int:
    return template.actor.size + (0 if template.init_logits is None else template.n_params)


def split_genome(template, genomes):
    """Genome rows -> (actor weights, learned initial logits or None)."""
    d = template.actor.size
    if template.init_logits is None:
        return genomes[..., :d], None
    return genomes[..., :d], genomes[..., d:]


def population_fitness(game: GameSpec, template: MetaPolicyParams, genomes, opponent_for,
                       T: int, batch: int, seed: int, chunk: int = 64):
    """Mean per-step own return of each genome over ``batch`` meta-episodes.

    ``opponent_for(actors, inits)`` returns the agent seated against a chunk
    of genomes. Every chunk replays the same seed, so all individuals see
    identical opponent initializations.
    """
    genomes = np.atleast_2d(genomes)
    fitness = np.empty(len(genomes))
    for lo in range(0, len(genomes), chunk):
        g = genomes[lo:lo + chunk]
        actors, inits = split_genome(template, g)
        me = MetaAgent(template, deterministic=True, actor=actors, init_logits=inits)
        rng = np.random.default_rng(seed)
        traj = play(game, me, opponent_for(actors, inits), T, batch, rng, record_logits=False)
        fitness[lo:lo + chunk] = traj.values_a.mean(axis=(-1, -2))
    return fitness


def versus(opponent_for):
    """Fitness function scoring genomes against ``opponent_for(actors, inits)``."""
    def fitness(game, template, genomes, cfg, seed, progress):
        return population_fitness(game, template, genomes, opponent_for, cfg.T, cfg.batch, seed,
                                  cfg.chunk)
    return fitness


def ga_train(game: GameSpec, opponent_for, rng: np.random.Generator, cfg: GAConfig | None = None,
             callback=None, fitness=None) -> GAResult:
    """Train a meta-policy actor with a truncation-selection GA.

    ``opponent_for(actors, inits)`` builds the opponent for a chunk of the
    population. Alternatively pass ``fitness(game, template, genomes, cfg,
    seed, progress)`` (``progress`` in [0, 1)) for custom scoring such as
    self-play. ``callback(gen, stats, elite_genome)`` runs after every
    generation.
    """
    cfg = cfg or GAConfig()
    cfg.validate()
    if fitness is None:
        if opponent_for is None:
            raise ValueError("ga_train needs opponent_for or fitness")
        fitness = versus(opponent_for)
    template = new_meta_policy(game, rng, hidden=cfg.hidden, learn_init=cfg.learn_init)
    D = _genome_size(template)
    genomes = np.empty((cfg.pop, D))
    net = template.actor_net
    genomes[:, :template.actor.size] = net.init(rng, size=cfg.pop)
    if cfg.learn_init:
        genomes[:, template.actor.size:] = rng.standard_normal((cfg.pop, game.n_params))
    history = []
    for gen in range(cfg.generations):
        seed = int(rng.integers(2 ** 63))
        fit = fitness(game, template, genomes, cfg, seed, gen / cfg.generations)
        order = np.argsort(-fit, kind="stable")
        stats = dict(generation=gen, best=float(fit[order[0]]), mean=float(fit.mean()),
                     top_mean=float(fit[order[:cfg.truncation]].mean()))
        history.append(stats)
        log.info("ga gen %d best %.4f top %.4f mean %.4f", gen, stats["best"], stats["top_mean"],
                 stats["mean"])
        if callback is not None:
            callback(gen, stats, genomes[order[0]].copy())
        if gen == cfg.generations - 1:
            break
        parents = genomes[order[:cfg.truncation]]
        children = parents[rng.integers(cfg.truncation, size=cfg.pop - cfg.elites)]
        children = children + cfg.sigma * rng.standard_normal(children.shape)
        genomes = np.concatenate([genomes[order[:cfg.elites]], children])
    best = genomes[order[0]]
    actor, init = split_genome(template, best)
    params = template.copy(actor=actor, init_logits=init)
    params.meta.update(optimizer="ga", ga=asdict(cfg), deterministic=True)
    return GAResult(params, history)
