"""
Head-to-head evaluation and round-robin tables.

A cell (A, B) is A's per-meta-step return, averaged over the T meta-steps
and the evaluation batch, then over independent runs, with A in seat a.
M-FOS entries use the policy trained against that specific opponent class
(self-play policy for M-FOS vs M-FOS).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .experiments import (SCALE, base_manifest, check_algorithm, hyperparameters, load_mfos,
                          make_learner, manifest_hash, mmaml_path, policy_path, rng_for_eval,
                          save_mfos, train_mfos_params, train_mmaml_artifact, write_json)
from .games import GameSpec
from .mfos.policy import MetaAgent
from .simulate import play

log = logging.getLogger(__name__)

NAMES = {"nl": "NL", "lola": "LOLA", "mmaml": "M-MAML", "mfos": "M-FOS", "labr": "LABR"}


@dataclass
class MatchConfig:
    game: GameSpec
    algo_a: str
    algo_b: str
    T: int = 100
    batch: int = 4096
    runs: int = 10
    seed: int = 0
    optimizer: str = "ga"
    artifacts: str | Path | None = None
    preset: str = "desk"

    def validate(self):
        if self.runs < 1 or self.T < 1 or self.batch < 1:
            raise ValueError("runs, T and batch must all be at least 1")
        check_algorithm(self.algo_a)
        check_algorithm(self.algo_b)
        if self.algo_a == self.algo_b == "labr":
            raise ValueError("LABR cannot face LABR: both sides would wait for the other's policy")


def make_agent(algo: str, opponent: str, cfg: MatchConfig):
    """Agent for ``algo`` when it faces ``opponent``."""
    if algo == "mfos":
        params = load_mfos(cfg.artifacts, cfg.game.name, opponent, cfg.optimizer, cfg.seed, cfg.preset)
        return MetaAgent(params, deterministic=bool(params.meta.get("deterministic", True)))
    return make_learner(algo, cfg.game, cfg.artifacts, cfg.seed, cfg.preset)


def head_to_head(cfg: MatchConfig):
    """``(mean_a, mean_b, std_a, std_b)`` over ``cfg.runs`` independent runs.

    Raises :class:`opshape.experiments.MissingArtifactError` (naming the
    training command) when a learned algorithm has not been trained.
    """
    cfg.validate()
    a = make_agent(cfg.algo_a, cfg.algo_b, cfg)
    b = make_agent(cfg.algo_b, cfg.algo_a, cfg)
    ra, rb = [], []
    for run in range(cfg.runs):
        rng = rng_for_eval(cfg.seed, cfg.game.name, cfg.algo_a, cfg.algo_b, run)
        va, vb = play(cfg.game, a, b, cfg.T, cfg.batch, rng, record_logits=False).mean_returns()
        ra.append(va)
        rb.append(vb)
    return float(np.mean(ra)), float(np.mean(rb)), float(np.std(ra)), float(np.std(rb))


def _rows(a):
    return [[None if np.isnan(x) else round(float(x), 12) for x in row] for row in a]


@dataclass
class TournamentResult:
    """Row side's mean and std return for each ordered pair."""

    game: str
    algos: list
    mean: np.ndarray
    std: np.ndarray
    seed: int
    config: dict = field(default_factory=dict)

    def cell(self, row: str, col: str):
        i, j = self.algos.index(row), self.algos.index(col)
        return float(self.mean[i, j]), float(self.std[i, j])

    def to_dict(self) -> dict:
        return {
            "game": self.game,
            "algos": list(self.algos),
            "mean": _rows(self.mean),
            "std": _rows(self.std),
            "seed": self.seed,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TournamentResult":
        return cls(d["game"], list(d["algos"]), np.array(d["mean"], dtype=float),
                   np.array(d["std"], dtype=float), d["seed"], d.get("config", {}))

    def to_text(self) -> str:
        """Aligned plain-text table: row algorithm's return vs each column."""
        labels = [NAMES.get(a, a) for a in self.algos]
        cells = [["n/a" if np.isnan(m) else f"{m:.3f} ± {s:.3f}" for m, s in zip(mr, sr)]
                 for mr, sr in zip(self.mean, self.std)]
        w0 = max(len(x) for x in labels + [self.game.upper()])
        w = max(max(len(c) for row in cells for c in row), max(len(x) for x in labels))
        lines = [self.game.upper().ljust(w0) + " | " + " | ".join(x.rjust(w) for x in labels)]
        lines.append("-" * len(lines[0]))
        for lab, row in zip(labels, cells):
            lines.append(lab.ljust(w0) + " | " + " | ".join(c.rjust(w) for c in row))
        return "\n".join(lines) + "\n"


def ensure_artifacts(game: GameSpec, algos, seed: int, preset: str, root, optimizer: str = "ga",
                     overrides: dict | None = None, train_missing: bool = True):
    """Train (or verify) every artifact a round robin over ``algos`` needs:
    the M-MAML initializer and one M-FOS policy per opponent column.

    ``overrides`` maps "ga", "ppo" or "mmaml" to hyperparameter overrides.
    """
    root = Path(root)
    written = []
    needs_mmaml = "mmaml" in algos
    if needs_mmaml and not mmaml_path(root, game.name, seed).exists():
        if not train_missing:
            make_learner("mmaml", game, root, seed, preset)  # raises with the command
        hp = hyperparameters("mmaml", preset, (overrides or {}).get("mmaml"))
        manifest = base_manifest("train", game, seed, preset, algo="mmaml", hyperparameters=hp)
        log.info("training M-MAML initializer for %s", game.name)
        train_mmaml_artifact(game, seed, hp, mmaml_path(root, game.name, seed), manifest)
        written.append(mmaml_path(root, game.name, seed))
    if "mfos" not in algos:
        return written
    hp = hyperparameters(optimizer, preset, (overrides or {}).get(optimizer))
    for opp in algos:
        if opp == "labr":
            continue
        path = policy_path(root, game.name, opp, optimizer, seed)
        if path.exists():
            continue
        if not train_missing:
            load_mfos(root, game.name, opp, optimizer, seed, preset)  # raises with the command
        manifest = base_manifest("train", game, seed, preset, algo="mfos", opponent=opp,
                                 optimizer=optimizer, hyperparameters=hp)
        log.info("training M-FOS vs %s on %s", opp, game.name)
        res = train_mfos_params(game, opp, optimizer, seed, hp, root, preset)
        save_mfos(path, res, manifest)
        written.append(path)
    return written


def round_robin(game: GameSpec, algos, seed: int = 0, preset: str = "desk", root=None,
                optimizer: str = "ga", runs: int | None = None, batch: int | None = None,
                T: int = 100, train_missing: bool = True, overrides: dict | None = None,
                manifest: dict | None = None) -> TournamentResult:
    """Fill the ordered-pair matrix over ``algos``, training M-FOS per column first."""
    algos = [check_algorithm(a) for a in algos]
    if root is None:
        raise ValueError("round_robin needs an artifacts directory")
    ensure_artifacts(game, algos, seed, preset, root, optimizer, overrides, train_missing)
    runs = SCALE[preset]["eval"]["runs"] if runs is None else runs
    batch = SCALE[preset]["eval"]["batch"] if batch is None else batch
    n = len(algos)
    mean = np.full((n, n), np.nan)
    std = np.full((n, n), np.nan)
    for i, ra in enumerate(algos):
        for j, cb in enumerate(algos):
            if ra == cb == "labr":
                continue
            cfg = MatchConfig(game, ra, cb, T, batch, runs, seed, optimizer, root, preset)
            mean[i, j], _, std[i, j], _ = head_to_head(cfg)
            log.info("%s vs %s: %.4f ± %.4f", ra, cb, mean[i, j], std[i, j])
    config = dict(preset=preset, optimizer=optimizer, runs=runs, batch=batch, T=T)
    if manifest is not None:
        config["manifest_hash"] = manifest_hash(manifest)
    return TournamentResult(game.name, algos, mean, std, seed, config)


def write_tournament(result: TournamentResult, out, footer: str = "") -> tuple[Path, Path]:
    """Write ``tournament.json`` and the aligned ``tournament.txt`` into ``out``."""
    out = Path(out)
    j = write_json(out / "tournament.json", result.to_dict())
    t = out / "tournament.txt"
    t.write_text(result.to_text() + footer)
    return j, t


__all__ = ["MatchConfig", "TournamentResult", "head_to_head", "round_robin", "ensure_artifacts",
           "write_tournament"]
