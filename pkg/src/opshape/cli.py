"""
Command-line runner: ``train``, ``tournament`` and ``analyze``.

Every run writes ``manifest.json`` (all settings, seed, preset) into its
output directory before anything else; the manifest's SHA-256 is embedded
in every output file. ``--resume`` turns a re-run with an identical
manifest whose outputs all exist into a no-op.

Exit codes:
  0 success (or up-to-date resume)
  2 bad command-line usage
  3 unknown game, algorithm, optimizer, preset or named policy
  4 missing trained artifact
  5 invalid configuration key or value
  6 numerical failure during training
  7 existing manifest differs from this run's (with --resume)
  8 file-system error
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .experiments import (ALGORITHMS, OPTIMIZERS, PRESETS, ConfigError, MissingArtifactError,
                          UnknownAlgorithmError, base_manifest, check_algorithm, check_game_name,
                          hyperparameters, load_mfos, make_learner, manifest_hash, mmaml_path,
                          policy_path, rng_for_eval, save_mfos, train_mfos_params,
                          train_mmaml_artifact, write_json)
from .games import UnknownGameError, make_game, named_policy
from .mfos.policy import MetaAgent
from .mfos.selfplay import SelfPlayConfig
from .simulate import play
from .tournament import round_robin, write_tournament

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNKNOWN = 3
EXIT_MISSING = 4
EXIT_CONFIG = 5
EXIT_NUMERIC = 6
EXIT_CONFLICT = 7
EXIT_IO = 8

OUT_ENV = "OPSHAPE_OUT"
DEFAULT_OUT = "opshape-runs"
CONFIG_KEYS = {"game", "algo", "algos", "opponent", "optimizer", "seed", "preset", "out", "runs",
               "batch", "learn_init", "kind", "subject", "n", "hyperparameters", "selfplay",
               "artifacts"}

log = logging.getLogger("opshape")


class ResumeConflict(RuntimeError):
    pass


class Usage(ValueError):
    """Flag combination that parses but cannot be run."""


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opshape", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--game", help="ipd, imp or chicken")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--preset", choices=PRESETS, help="scale preset (default desk)")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--resume", action="store_true",
                        help="skip the run if the manifest matches and all outputs exist")
        sp.add_argument("--config", help="JSON file with default values for these flags")
        sp.add_argument("--artifacts", help="directory holding trained artifacts (default --out)")
        sp.add_argument("-v", "--verbose", action="store_true")

    t = sub.add_parser("train", help="train an M-FOS meta-policy or an M-MAML initializer")
    common(t)
    t.add_argument("--algo", help="mfos or mmaml")
    t.add_argument("--opponent", help=f"opponent class for mfos: {', '.join(ALGORITHMS)}")
    t.add_argument("--optimizer", choices=OPTIMIZERS)
    t.add_argument("--learn-init", dest="learn_init", action="store_true", default=None,
                   help="also learn M-FOS's initial policy (GA only)")
    t.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one training hyperparameter")

    r = sub.add_parser("tournament", help="round-robin head-to-head table")
    common(r)
    r.add_argument("--algos", help="comma-separated algorithms (default nl,lola,mmaml,mfos)")
    r.add_argument("--optimizer", choices=OPTIMIZERS)
    r.add_argument("--runs", type=int)
    r.add_argument("--batch", type=int)
    r.add_argument("--no-train", dest="no_train", action="store_true",
                   help="fail instead of training missing artifacts")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="[GROUP.]KEY=VALUE",
                   help="override a training hyperparameter; GROUP is ga, ppo or mmaml "
                        "(default: the chosen optimizer)")

    a = sub.add_parser("analyze", help="payoff region, ZD fit or trace export")
    common(a)
    a.add_argument("--kind", choices=("region", "zd", "trace"))
    a.add_argument("--subject",
                   help="region/zd subject: tft, alld, allc, wsls or mfos (final policy vs --opponent)")
    a.add_argument("--algo", help="trace: seat-a algorithm (default mfos)")
    a.add_argument("--opponent", help="trace or mfos subject: opponent algorithm (default nl)")
    a.add_argument("--optimizer", choices=OPTIMIZERS)
    a.add_argument("--n", type=int, help="region: number of sampled opponents (default 4096)")
    a.add_argument("--batch", type=int, help="trace: number of meta-episodes (default 16)")
    return p


def _merge_config(args) -> dict:
    """Flag values over config-file values over defaults."""
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        except ValueError as e:
            raise ConfigError(f"config {args.config} is not valid JSON: {e}") from e
        if not isinstance(cfg, dict):
            raise ConfigError(f"config {args.config} must hold a JSON object")
        bad = sorted(set(cfg) - CONFIG_KEYS)
        if bad:
            raise ConfigError(f"invalid config key(s) {', '.join(bad)}; valid keys: {', '.join(sorted(CONFIG_KEYS))}")
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "overrides"):
            cfg[key] = value
    hp = dict(cfg.get("hyperparameters", {}))
    for item in getattr(args, "overrides", []) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        hp[k.strip()] = v.strip()
    cfg["hyperparameters"] = hp
    cfg.setdefault("seed", 0)
    cfg.setdefault("preset", "desk")
    cfg.setdefault("out", os.environ.get(OUT_ENV) or DEFAULT_OUT)
    if "game" not in cfg:
        raise Usage("--game is required")
    cfg["game"] = check_game_name(cfg["game"])
    return cfg


def _embedded(path: Path, digest: str) -> bool:
    try:
        return digest in path.read_text()
    except OSError:
        return False


def _start(out: Path, manifest: dict, outputs: list[str], resume: bool) -> bool:
    """Write the manifest; return False when ``--resume`` finds the run complete."""
    manifest = dict(manifest, outputs=sorted(outputs))
    digest = manifest_hash(manifest)
    mpath = out / "manifest.json"
    if resume and mpath.exists():
        try:
            old = json.loads(mpath.read_text())
        except ValueError:
            old = None
        if old is not None and old.get("manifest_hash") != digest:
            raise ResumeConflict(
                f"{mpath} was written by a different configuration "
                f"(hash {str(old.get('manifest_hash'))[:12]} vs {digest[:12]}); use a new --out or drop --resume")
        if all(_embedded(out / o, digest) for o in outputs):
            print(f"up to date: {out} (manifest {digest[:12]})")
            return False
    write_json(mpath, dict(manifest, manifest_hash=digest))
    return True


def _digest(out: Path) -> str:
    return json.loads((out / "manifest.json").read_text())["manifest_hash"]


def _manifest_for_hash(out: Path) -> dict:
    m = json.loads((out / "manifest.json").read_text())
    m.pop("manifest_hash")
    return m


# ------------------------------------------------------------------ commands

def cmd_train(cfg: dict) -> int:
    game = make_game(cfg["game"])
    algo = cfg.get("algo", "mfos")
    if algo not in ("mfos", "mmaml"):
        check_algorithm(algo)
        raise Usage(f"only mfos and mmaml are trainable, got {algo!r}")
    out = Path(cfg["out"])
    root = Path(cfg.get("artifacts", out))
    seed, preset = int(cfg["seed"]), cfg["preset"]
    if algo == "mmaml":
        hp = hyperparameters("mmaml", preset, cfg["hyperparameters"])
        manifest = base_manifest("train", game, seed, preset, algo="mmaml", hyperparameters=hp)
        path = mmaml_path(out, game.name, seed)
        if not _start(out, manifest, [str(path.relative_to(out))], cfg.get("resume", False)):
            return EXIT_OK
        train_mmaml_artifact(game, seed, hp, path, _manifest_for_hash(out))
        print(f"wrote {path}")
        return EXIT_OK

    opponent = check_algorithm(cfg.get("opponent", "nl"))
    optimizer = cfg.get("optimizer", "ga")
    if optimizer not in OPTIMIZERS:
        raise UnknownAlgorithmError(f"unknown optimizer {optimizer!r}; valid optimizers: {', '.join(OPTIMIZERS)}")
    overrides = dict(cfg["hyperparameters"])
    if cfg.get("learn_init"):
        if optimizer != "ga":
            raise ConfigError("--learn-init is only supported with the GA optimizer")
        overrides["learn_init"] = True
    hp = hyperparameters(optimizer, preset, overrides)
    schedule = None
    if opponent == "mfos":
        try:
            schedule = SelfPlayConfig(**cfg.get("selfplay", {}))
            schedule.validate()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad selfplay schedule: {e}") from None
    manifest = base_manifest("train", game, seed, preset, algo="mfos", opponent=opponent,
                             optimizer=optimizer, hyperparameters=hp,
                             selfplay=None if schedule is None else vars(schedule))
    path = policy_path(out, game.name, opponent, optimizer, seed, bool(hp.get("learn_init")))
    if opponent == "mmaml":
        make_learner("mmaml", game, root, seed, preset)  # fail before writing anything
    if not _start(out, manifest, [str(path.relative_to(out))], cfg.get("resume", False)):
        return EXIT_OK
    res = train_mfos_params(game, opponent, optimizer, seed, hp, root, preset, schedule)
    save_mfos(path, res, _manifest_for_hash(out))
    print(f"wrote {path}")
    return EXIT_OK


def _grouped(hp: dict, default_group: str) -> dict:
    """``{"ga": {...}}`` style overrides from nested dicts or ``group.key`` names."""
    out = {}
    for key, value in hp.items():
        if isinstance(value, dict):
            out.setdefault(key, {}).update(value)
        elif "." in key:
            group, name = key.split(".", 1)
            out.setdefault(group, {})[name] = value
        else:
            out.setdefault(default_group, {})[key] = value
    bad = sorted(set(out) - {"ga", "ppo", "mmaml"})
    if bad:
        raise ConfigError(f"unknown hyperparameter group(s) {', '.join(bad)}; valid groups: ga, mmaml, ppo")
    return out


def cmd_tournament(cfg: dict) -> int:
    game = make_game(cfg["game"])
    algos = cfg.get("algos", "nl,lola,mmaml,mfos")
    algos = [a.strip() for a in algos.split(",")] if isinstance(algos, str) else list(algos)
    for a in algos:
        check_algorithm(a)
    out = Path(cfg["out"])
    root = Path(cfg.get("artifacts", out))
    optimizer = cfg.get("optimizer", "ga")
    if optimizer not in OPTIMIZERS:
        raise UnknownAlgorithmError(f"unknown optimizer {optimizer!r}; valid optimizers: {', '.join(OPTIMIZERS)}")
    overrides = _grouped(cfg["hyperparameters"], optimizer)
    resolved = {g: hyperparameters(g, cfg["preset"], overrides.get(g)) for g in sorted({optimizer, "mmaml", *overrides})}
    manifest = base_manifest("tournament", game, cfg["seed"], cfg["preset"], algos=algos,
                             optimizer=optimizer, runs=cfg.get("runs"), batch=cfg.get("batch"),
                             hyperparameters=resolved)
    if not _start(out, manifest, ["tournament.json", "tournament.txt"], cfg.get("resume", False)):
        return EXIT_OK
    result = round_robin(game, algos, int(cfg["seed"]), cfg["preset"], root, optimizer,
                         cfg.get("runs"), cfg.get("batch"), train_missing=not cfg.get("no_train"),
                         overrides=resolved, manifest=_manifest_for_hash(out))
    write_tournament(result, out, footer=f"manifest {_digest(out)}\n")
    print(result.to_text(), end="")
    return EXIT_OK


def _subject_policy(cfg, game, root):
    name = cfg.get("subject", "tft")
    if name != "mfos":
        try:
            return named_policy(name)
        except KeyError as e:
            raise UnknownAlgorithmError(str(e.args[0])) from None
    opponent = cfg.get("opponent", "nl")
    params = load_mfos(root, game.name, opponent, cfg.get("optimizer", "ga"), int(cfg["seed"]), cfg["preset"])
    rng = rng_for_eval(int(cfg["seed"]), game.name, "subject", opponent)
    traj = play(game, MetaAgent(params), make_learner(opponent, game, root, int(cfg["seed"]), cfg["preset"]),
                100, 1, rng)
    return traj.logits_a[0, -1]


def cmd_analyze(cfg: dict) -> int:
    game = make_game(cfg["game"])
    kind = cfg.get("kind", "region")
    out = Path(cfg["out"])
    root = Path(cfg.get("artifacts", out))
    seed = int(cfg["seed"])
    if kind == "trace":
        algo, opponent = check_algorithm(cfg.get("algo", "mfos")), check_algorithm(cfg.get("opponent", "nl"))
        optimizer = cfg.get("optimizer", "ga")
        batch = int(cfg.get("batch", 16))
        manifest = base_manifest("analyze", game, seed, cfg["preset"], kind=kind, algo=algo,
                                 opponent=opponent, optimizer=optimizer, batch=batch)
        if not _start(out, manifest, ["trace.csv"], cfg.get("resume", False)):
            return EXIT_OK
        from .tournament import MatchConfig, make_agent
        mc = MatchConfig(game, algo, opponent, batch=batch, runs=1, seed=seed, optimizer=optimizer,
                         artifacts=root, preset=cfg["preset"])
        traj = play(game, make_agent(algo, opponent, mc), make_agent(opponent, algo, mc), 100, batch,
                    rng_for_eval(seed, game.name, "trace", algo, opponent))
        path = analysis.trace_export(traj, game, out / "trace.csv", manifest_hash=_digest(out))
        print(f"wrote {path}")
        return EXIT_OK

    subject = cfg.get("subject", "tft")
    n = int(cfg.get("n", 4096))
    manifest = base_manifest("analyze", game, seed, cfg["preset"], kind=kind, subject=subject, n=n,
                             opponent=cfg.get("opponent"), optimizer=cfg.get("optimizer"))
    outputs = ["zd.json"] + (["region.csv"] if kind == "region" else [])
    if not _start(out, manifest, outputs, cfg.get("resume", False)):
        return EXIT_OK
    policy = _subject_policy(cfg, game, root)
    cloud = analysis.payoff_region(game, policy, n, rng_for_eval(seed, game.name, "region", subject))
    fit = analysis.zd_fit(cloud)
    digest = _digest(out)
    doc = {"subject": subject, "subject_logits": [float(x) for x in policy], "n": n,
           "n_corners": cloud.n_corners, "manifest_hash": digest,
           "fit": {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in vars(fit).items()}}
    write_json(out / "zd.json", doc)
    if kind == "region":
        analysis.write_cloud(cloud, out / "region.csv", manifest_hash=digest)
    print(json.dumps(doc["fit"], sort_keys=True))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "tournament": cmd_tournament, "analyze": cmd_analyze}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _merge_config(args)
        return COMMANDS[args.command](cfg)
    except (UnknownGameError, UnknownAlgorithmError) as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return EXIT_UNKNOWN
    except MissingArtifactError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Usage as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResumeConflict as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFLICT
    except FloatingPointError as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
