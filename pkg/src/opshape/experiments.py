"""
Experiment plumbing shared by the tournament and the command line:
scale presets, manifests, artifact locations and training entry points.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .games import GAMES, GameSpec, UnknownGameError
from .learners import LolaLearner, LookaheadBestResponder, MamlLearner, NaiveLearner, mmaml_train
from .mfos.ga import GAConfig, ga_train
from .mfos.io import canonical_json, load_init, load_policy, save_init, save_policy
from .mfos.ppo import PPOConfig, ppo_train
from .mfos.selfplay import SelfPlayConfig, selfplay_train
from .seeding import substream

ALGORITHMS = ("nl", "lola", "mmaml", "mfos", "labr")
OPTIMIZERS = ("ga", "ppo")
PRESETS = ("desk", "paper")
ACTIVATION = "tanh"

# Per-preset training and evaluation scales; everything else is a fixed default.
SCALE = {
    "desk": {
        # a small population searches better with smaller mutations
        "ga": dict(pop=256, batch=32, generations=40, sigma=0.5),
        "ppo": dict(batch=512, updates=200),
        "mmaml": dict(batch=64, iters=300),
        "eval": dict(batch=512, runs=3),
        "labr_steps": 1000,
    },
    "paper": {
        "ga": dict(pop=2048, batch=128, generations=200),
        "ppo": dict(batch=4096, updates=1000),
        "mmaml": dict(batch=4096, iters=1000),
        "eval": dict(batch=4096, runs=10),
        "labr_steps": 1000,
    },
}


class MissingArtifactError(FileNotFoundError):
    """A trained policy or initializer the run depends on does not exist."""


class UnknownAlgorithmError(KeyError):
    pass


class ConfigError(ValueError):
    """Invalid configuration key or value."""


def check_algorithm(name: str) -> str:
    if name not in ALGORITHMS:
        raise UnknownAlgorithmError(f"unknown algorithm {name!r}; valid algorithms: {', '.join(ALGORITHMS)}")
    return name


def check_game_name(name: str) -> str:
    if name.lower() not in GAMES:
        raise UnknownGameError(f"unknown game {name!r}; valid games: {', '.join(sorted(GAMES))}")
    return name.lower()


def hyperparameters(kind: str, preset: str = "desk", overrides: dict | None = None) -> dict:
    """Full hyperparameter dict for ``kind`` ("ga", "ppo", "mmaml") at ``preset`` scale."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; valid presets: {', '.join(PRESETS)}")
    if kind == "ga":
        base = asdict(GAConfig(**SCALE[preset]["ga"]))
    elif kind == "ppo":
        base = asdict(PPOConfig(**SCALE[preset]["ppo"]))
    elif kind == "mmaml":
        base = dict(T=100, adam_lr=0.05, h=1e-3, **SCALE[preset]["mmaml"])
    else:
        raise ConfigError(f"unknown hyperparameter group {kind!r}")
    for key, value in (overrides or {}).items():
        if key not in base:
            raise ConfigError(f"invalid {kind} hyperparameter {key!r}; valid keys: {', '.join(sorted(base))}")
        base[key] = _coerce(key, base[key], value)
    try:
        if kind == "ga":
            GAConfig(**base).validate()
        elif kind == "ppo":
            PPOConfig(**base).validate()
        elif min(base["T"], base["batch"], base["iters"]) < 1 or base["adam_lr"] <= 0 or base["h"] <= 0:
            raise ValueError("M-MAML T, batch, iters, adam_lr and h must be positive")
    except ValueError as e:
        raise ConfigError(f"invalid {kind} hyperparameters: {e}") from None
    return base


def _coerce(key, default, value):
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except ValueError:
            raise ConfigError(f"cannot parse value {value!r} for {key!r}") from None
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key!r} must be true or false, got {value!r}")
        return value
    if isinstance(default, int) and not (isinstance(value, int) and not isinstance(value, bool)):
        raise ConfigError(f"{key!r} must be an integer, got {value!r}")
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key!r} must be a number, got {value!r}")
        return float(value)
    return value


def manifest_hash(manifest: dict) -> str:
    return hashlib.sha256(canonical_json(manifest).encode("utf-8")).hexdigest()


def base_manifest(command: str, game: GameSpec, seed: int, preset: str, **fields) -> dict:
    return {
        "tool": "opshape",
        "version": __version__,
        "command": command,
        "game": game.to_dict(),
        "seed": int(seed),
        "preset": preset,
        "activation": ACTIVATION,
        **fields,
    }


def write_json(path, doc) -> Path:
    """Canonical, newline-terminated JSON (byte-stable for equal content)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n")
    return path


# ----------------------------------------------------------------- artifacts

def policy_path(root, game: str, opponent: str, optimizer: str, seed: int,
                learn_init: bool = False) -> Path:
    tag = "-init" if learn_init else ""
    return Path(root) / game / f"mfos-vs-{opponent}-{optimizer}{tag}-s{seed}.json"


def mmaml_path(root, game: str, seed: int) -> Path:
    return Path(root) / game / f"mmaml-s{seed}.json"


def train_command(game: str, algo: str, seed: int, out, opponent: str | None = None,
                  optimizer: str | None = None, preset: str = "desk") -> str:
    cmd = f"python -m opshape train --game {game} --algo {algo}"
    if opponent:
        cmd += f" --opponent {opponent}"
    if optimizer:
        cmd += f" --optimizer {optimizer}"
    return cmd + f" --seed {seed} --preset {preset} --out {out}"


def load_mmaml(root, game: str, seed: int, preset: str = "desk"):
    path = mmaml_path(root, game, seed)
    if not path.exists():
        raise MissingArtifactError(
            f"missing M-MAML initializer {path}; train it with: "
            f"{train_command(game, 'mmaml', seed, root, preset=preset)}")
    return load_init(path)[0]


def load_mfos(root, game: str, opponent: str, optimizer: str, seed: int, preset: str = "desk",
              learn_init: bool = False):
    path = policy_path(root, game, opponent, optimizer, seed, learn_init)
    if not path.exists():
        raise MissingArtifactError(
            f"missing M-FOS policy {path}; train it with: "
            f"{train_command(game, 'mfos', seed, root, opponent, optimizer, preset)}"
            + (" --learn-init" if learn_init else ""))
    return load_policy(path)


def make_learner(name: str, game: GameSpec, root=None, seed: int = 0, preset: str = "desk"):
    """A non-meta agent by algorithm name (M-MAML loads its initializer from ``root``)."""
    check_algorithm(name)
    if name == "nl":
        return NaiveLearner()
    if name == "lola":
        return LolaLearner()
    if name == "labr":
        return LookaheadBestResponder(steps=SCALE[preset]["labr_steps"])
    if name == "mmaml":
        return MamlLearner(load_mmaml(root, game.name, seed, preset))
    raise UnknownAlgorithmError(f"{name!r} is not a fixed learner")


# ------------------------------------------------------------------ training

def train_mmaml_artifact(game: GameSpec, seed: int, hp: dict, path, manifest: dict):
    rng = substream(seed, "train", "mmaml", game.name)
    res = mmaml_train(game, rng, **hp)
    save_init(path, res.init_logits, game.name, seed, hp,
              meta={"manifest_hash": manifest_hash(manifest), "objective": res.history[-1]})
    return res


def train_mfos_params(game: GameSpec, opponent: str, optimizer: str, seed: int, hp: dict,
                      root=None, preset: str = "desk", schedule: SelfPlayConfig | None = None,
                      callback=None):
    """Train a meta-policy against ``opponent`` ("mfos" means meta-self-play)."""
    if optimizer not in OPTIMIZERS:
        raise ConfigError(f"unknown optimizer {optimizer!r}; valid optimizers: {', '.join(OPTIMIZERS)}")
    rng = substream(seed, "train", "mfos", game.name, opponent, optimizer)
    cfg = GAConfig(**hp) if optimizer == "ga" else PPOConfig(**hp)
    if opponent == "mfos":
        res = selfplay_train(game, optimizer, rng, cfg, schedule or SelfPlayConfig(), callback)
    else:
        learner = make_learner(opponent, game, root, seed, preset)
        if optimizer == "ga":
            res = ga_train(game, lambda actors, inits: learner, rng, cfg, callback)
        else:
            res = ppo_train(game, lambda u, r: [(learner, cfg.batch)], rng, cfg, callback)
    res.params.meta.update(game=game.name, opponent=opponent, seed=int(seed), activation=ACTIVATION)
    return res


def save_mfos(path, res, manifest: dict) -> str:
    return save_policy(path, res.params, meta={"manifest_hash": manifest_hash(manifest),
                                               "history": res.history})


def rng_for_eval(seed: int, *names) -> np.random.Generator:
    return substream(seed, "eval", *names)
