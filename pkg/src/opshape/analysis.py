"""
Post-hoc analysis: payoff clouds against a fixed subject policy, linear
(ZD-style) relation fits, and per-meta-step trace files.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .games import STATES, Chain, GameSpec, corner_strategies, game_value, init_policy, probabilities
from .simulate import Trajectory

TRACE_VERSION = 1
TRACE_MAGIC = "opshape-trace"


@dataclass
class PayoffCloud:
    """Exact values of many opponent policies against one subject policy."""

    v_opponent: np.ndarray
    v_subject: np.ndarray
    opponents: np.ndarray
    n_corners: int = 0

    def __len__(self):
        return len(self.v_subject)


@dataclass
class ZdFit:
    """Least-squares line ``v_subject = slope * v_opponent + intercept``.

    ``favored`` is "subject", "opponent" or "neither", judged on the top
    decile of opponent values (the opponent's best-response neighborhood).
    A cloud with no spread in ``v_opponent`` is ``degenerate``: slope and
    intercept are NaN and ``r2`` is 1.
    """

    slope: float
    intercept: float
    r2: float
    favored: str
    degenerate: bool = False


def payoff_region(game: GameSpec, subject, n: int = 4096, rng: np.random.Generator | None = None,
                  corners: bool = True) -> PayoffCloud:
    """Sample ``n`` standard-normal opponent policies (plus the deterministic
    corner strategies) and evaluate each against the fixed ``subject`` (seat a)."""
    if n < 2:
        raise ValueError("payoff_region needs n >= 2")
    rng = np.random.default_rng() if rng is None else rng
    subject = np.asarray(subject, dtype=float)
    opps = init_policy(game, rng, n)
    k = 0
    if corners:
        c = corner_strategies(game)
        opps = np.concatenate([opps, c])
        k = len(c)
    vs, vo = game_value(game, np.broadcast_to(subject, opps.shape), opps)
    return PayoffCloud(vo, vs, opps, k)


def zd_fit(cloud: PayoffCloud, tol: float = 1e-9) -> ZdFit:
    x = np.asarray(cloud.v_opponent, dtype=float)
    y = np.asarray(cloud.v_subject, dtype=float)
    if len(x) < 2:
        raise ValueError("zd_fit needs at least two points")
    top = x >= np.quantile(x, 0.9)
    gap = float(np.mean(y[top] - x[top]))
    favored = "subject" if gap > tol else "opponent" if gap < -tol else "neither"
    if np.ptp(x) <= tol:
        return ZdFit(float("nan"), float("nan"), 1.0, favored, degenerate=True)
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot <= tol * tol else float(np.clip(1 - resid @ resid / ss_tot, 0.0, 1.0))
    return ZdFit(slope, intercept, r2, favored)


def trace_columns(n_params: int) -> list[str]:
    cols = ["episode", "t"]
    cols += [f"a_p{i}" for i in range(n_params)] + [f"b_p{i}" for i in range(n_params)]
    cols += ["v_a", "v_b"] + [f"visit_{s}" for s in STATES]
    return cols


def trace_export(traj: Trajectory, game: GameSpec, path, manifest_hash: str | None = None) -> Path:
    """Write one CSV row per (episode, meta-step): both policies as
    probabilities (each in its owner's state order), both values and the
    normalized discounted visitation of the joint-action chain (seat a's
    state order). The first line is a versioned header comment.
    """
    if traj.logits_a is None:
        raise ValueError("trace_export needs a trajectory recorded with logits")
    la = np.asarray(traj.logits_a).reshape(-1, traj.T, game.n_params)
    lb = np.asarray(traj.logits_b).reshape(-1, traj.T, game.n_params)
    va = np.asarray(traj.values_a).reshape(-1, traj.T)
    vb = np.asarray(traj.values_b).reshape(-1, traj.T)
    visit = Chain(game, la, lb).visitation()
    pa, pb = probabilities(la), probabilities(lb)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            head = f"# {TRACE_MAGIC} v{TRACE_VERSION} game={game.name} horizon={game.horizon}"
            if manifest_hash:
                head += f" manifest={manifest_hash}"
            fh.write(head + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(trace_columns(game.n_params))
            for e in range(len(la)):
                for t in range(traj.T):
                    w.writerow([e, t, *map(repr, pa[e, t].tolist()), *map(repr, pb[e, t].tolist()),
                                repr(float(va[e, t])), repr(float(vb[e, t])),
                                *map(repr, visit[e, t].tolist())])
    except OSError as err:
        raise OSError(f"could not write trace {path}: {err}") from err
    return path


def write_cloud(cloud: PayoffCloud, path, manifest_hash: str | None = None) -> Path:
    """CSV of (v_opponent, v_subject, is_corner) rows with a versioned header."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            head = f"# opshape-region v{TRACE_VERSION}"
            if manifest_hash:
                head += f" manifest={manifest_hash}"
            fh.write(head + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["v_opponent", "v_subject", "corner"])
            first_corner = len(cloud) - cloud.n_corners
            for i, (x, y) in enumerate(zip(cloud.v_opponent.tolist(), cloud.v_subject.tolist())):
                w.writerow([repr(x), repr(y), int(i >= first_corner)])
    except OSError as err:
        raise OSError(f"could not write payoff region {path}: {err}") from err
    return path


@dataclass
class Trace:
    game: str
    horizon: str
    probs_a: np.ndarray
    probs_b: np.ndarray
    values_a: np.ndarray
    values_b: np.ndarray
    visitation: np.ndarray


def read_trace(path) -> Trace:
    """Parse a file written by :func:`trace_export` (arrays are episode x T x ...)."""
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline().split()
        if len(header) < 3 or header[1] != TRACE_MAGIC:
            raise ValueError(f"{path} is not a trace file")
        if header[2] != f"v{TRACE_VERSION}":
            raise ValueError(f"{path}: unsupported trace version {header[2]}")
        meta = dict(kv.split("=", 1) for kv in header[3:])
        rows = list(csv.reader(fh))
    cols = rows[0]
    data = np.array(rows[1:], dtype=float)
    n = sum(c.startswith("a_p") for c in cols)
    episodes = int(data[:, 0].max()) + 1 if len(data) else 0
    data = data.reshape(episodes, -1, len(cols))
    i = 2
    pa = data[..., i:i + n]
    pb = data[..., i + n:i + 2 * n]
    i += 2 * n
    return Trace(meta.get("game", ""), meta.get("horizon", ""), pa, pb, data[..., i], data[..., i + 1],
                 data[..., i + 2:i + 6])


def tft_line(discount: float) -> tuple[float, float]:
    """Exact line of payoffs against tit-for-tat in the discounted IPD.

    Writing the per-round IPD payoffs as ``-2 + 2 y - x`` (x own cooperation,
    y the other's), tit-for-tat's copy rule makes both normalized values
    affine in the opponent's discounted cooperation mass, which gives
    ``v_tft = slope * v_opp + intercept`` with the values below. Both tend
    to (1, 0) as the discount tends to 1.
    """
    g = discount
    slope = (2 - g) / (2 * g - 1)
    # anchor: the all-defect opponent scores -2 + 2 (1 - g) and tit-for-tat 3 (1 - g) less
    v_opp = -2 + 2 * (1 - g)
    v_tft = v_opp - 3 * (1 - g)
    return slope, v_tft - slope * v_opp
