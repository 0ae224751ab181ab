"""
Exact first derivatives and mixed second derivatives of game values with
respect to policy logits, plus central finite-difference oracles.

Derivatives of the iterated value ``v = (1 - g) p0^T M r`` with
``M = (I - g P)^-1`` use ``dM = g M dP M``. Each probability enters
either ``p0`` or one row of ``P`` through the bilinear ``joint(x, y)``,
so all first and mixed second derivatives reduce to a handful of
contractions with ``y = p0^T M`` and ``z = M r``.
"""
from __future__ import annotations

import numpy as np

from .games import B_PERM, ONE_SHOT, Chain, GameSpec, game_value, sigmoid

_K = np.array([1.0, -1.0, -1.0, 1.0])  # d^2 joint / dx dy


def _jx(y):
    """d joint(x, y) / dx."""
    return np.stack([y, 1 - y, -y, -(1 - y)], axis=-1)


def _jy(x):
    """d joint(x, y) / dy."""
    return np.stack([x, -x, 1 - x, -(1 - x)], axis=-1)


def _dsig(logits):
    s = sigmoid(logits)
    return s * (1 - s)


def _reward(game, value_of):
    if value_of == "a":
        return game.reward_a
    if value_of == "b":
        return game.reward_b
    raise ValueError(f"agent must be 'a' or 'b', got {value_of!r}")


def _prob_grad(ch: Chain, r, wrt):
    """d v / d probs of agent ``wrt`` (b's in a's state order)."""
    game = ch.game
    z = ch.z(r)
    if wrt == "a":
        J0, Jrows = _jx(ch.pb[..., 0]), (_jx(ch.pb[..., 1:]) if game.horizon != ONE_SHOT else None)
    else:
        J0, Jrows = _jy(ch.pa[..., 0]), (_jy(ch.pa[..., 1:]) if game.horizon != ONE_SHOT else None)
    if game.horizon == ONE_SHOT:
        return np.einsum("...i,...i->...", J0, z)[..., None]
    g = game.discount
    c = 1 - g
    d0 = c * np.einsum("...i,...i->...", J0, z)
    drows = c * g * ch.y * np.einsum("...si,...i->...s", Jrows, z)
    return np.concatenate([d0[..., None], drows], axis=-1)


def value_grad(game: GameSpec, la, lb, value_of: str = "a", wrt: str = "a"):
    """Exact gradient of the normalized value of ``value_of`` w.r.t. ``wrt``'s logits."""
    ch = Chain(game, la, lb)
    return _grad_from_chain(ch, la, lb, value_of, wrt)


def _grad_from_chain(ch, la, lb, value_of, wrt):
    d = _prob_grad(ch, _reward(ch.game, value_of), wrt)
    if wrt == "a":
        return d * _dsig(np.asarray(la, dtype=float))
    if wrt != "b":
        raise ValueError(f"agent must be 'a' or 'b', got {wrt!r}")
    if ch.game.horizon != ONE_SHOT:
        d = d[..., np.argsort(B_PERM)]
    return d * _dsig(np.asarray(lb, dtype=float))


def _prob_cross(ch: Chain, r):
    """d^2 v / d pa_i d pb_j with b's probabilities in a's state order."""
    game = ch.game
    z = ch.z(r)
    if game.horizon == ONE_SHOT:
        return (z @ _K)[..., None, None]
    g = game.discount
    c = 1 - g
    M, y = ch.M, ch.y
    pa, pb = ch.pa, ch.pb
    Jx0, Jy0 = _jx(pb[..., 0]), _jy(pa[..., 0])
    Jx, Jy = _jx(pb[..., 1:]), _jy(pa[..., 1:])          # (..., 4 rows, 4)
    JxM = Jx @ M                                          # row s: Jx(pb_s)^T M
    JyM = Jy @ M
    Jxz = np.einsum("...si,...i->...s", Jx, z)
    Jyz = np.einsum("...si,...i->...s", Jy, z)
    Kz = z @ _K
    H = np.empty(pa.shape + (pb.shape[-1],))
    H[..., 0, 0] = c * Kz
    # a0 with row s of b: p0 derivative then row derivative
    H[..., 0, 1:] = c * g * (Jx0[..., None, :] @ M)[..., 0, :] * Jyz
    H[..., 1:, 0] = c * g * (Jy0[..., None, :] @ M)[..., 0, :] * Jxz
    # rows s (a) and s' (b)
    rows = g * g * (y[..., :, None] * JxM * Jyz[..., None, :]
                    + (y[..., :, None] * JyM * Jxz[..., None, :]).swapaxes(-1, -2))
    diag = g * y * Kz[..., None]
    rows = rows + diag[..., :, None] * np.eye(4)
    H[..., 1:, 1:] = c * rows
    return H


def value_cross_hessian(game: GameSpec, la, lb, value_of: str = "a"):
    """Exact mixed derivative d^2 v / d la d lb, shape ``(..., len_a, len_b)``."""
    ch = Chain(game, la, lb)
    return _cross_from_chain(ch, la, lb, value_of)


def _cross_from_chain(ch, la, lb, value_of):
    H = _prob_cross(ch, _reward(ch.game, value_of))
    if ch.game.horizon != ONE_SHOT:
        H = H[..., np.argsort(B_PERM)]
    da = _dsig(np.asarray(la, dtype=float))
    db = _dsig(np.asarray(lb, dtype=float))
    return H * da[..., :, None] * db[..., None, :]


def value_and_grads(game: GameSpec, la, lb, cross: bool = False) -> dict:
    """Values, all four gradients and optionally both cross-Hessians from one solve.

    Keys: ``va, vb, ga_a, ga_b, gb_a, gb_b`` (``gX_Y`` = d v_X / d logits_Y),
    and ``Ha, Hb`` when ``cross`` is set.
    """
    ch = Chain(game, la, lb)
    out = {"va": ch.value(game.reward_a), "vb": ch.value(game.reward_b)}
    for v in "ab":
        for w in "ab":
            out[f"g{v}_{w}"] = _grad_from_chain(ch, la, lb, v, w)
    if cross:
        out["Ha"] = _cross_from_chain(ch, la, lb, "a")
        out["Hb"] = _cross_from_chain(ch, la, lb, "b")
    return out


def central_diff(f, x, h: float = 1e-4):
    """Central differences of a batched scalar function along the last axis of ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(np.shape(f(x)) + (x.shape[-1],))
    for i in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[i] = h
        out[..., i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)
    return out


def fd_grad(game: GameSpec, la, lb, value_of: str = "a", wrt: str = "a", h: float = 1e-4):
    """Finite-difference counterpart of :func:`value_grad`."""
    if h <= 0:
        raise ValueError("h must be positive")
    idx = 0 if value_of == "a" else 1
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    if wrt == "a":
        return central_diff(lambda x: game_value(game, x, lb)[idx], la, h)
    return central_diff(lambda x: game_value(game, la, x)[idx], lb, h)


def fd_cross_hessian(game: GameSpec, la, lb, value_of: str = "a", h: float = 1e-3):
    """Mixed second derivative by central differences of the exact b-gradient."""
    lb = np.asarray(lb, dtype=float)
    return central_diff(lambda x: value_grad(game, x, lb, value_of, "b"), la, h).swapaxes(-1, -2)
