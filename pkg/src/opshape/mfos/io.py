"""
Text serialization for trained meta-policies and M-MAML initializers.

Files are canonical JSON (sorted keys, fixed separators) so identical
contents give identical bytes. Arrays are stored as base64 of little-endian
float64 for exact round trips. Each file carries a git-style content hash
(SHA-1 over ``"blob <len>\\0" + payload``) of everything except the hash.
"""
from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

from .policy import MetaPolicyParams

POLICY_FORMAT = "opshape.meta-policy"
INIT_FORMAT = "opshape.mmaml-init"
VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(payload: str) -> str:
    data = payload.encode("utf-8")
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def encode_array(a) -> dict | None:
    if a is None:
        return None
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "b64": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(d) -> np.ndarray | None:
    if d is None:
        return None
    return np.frombuffer(base64.b64decode(d["b64"]), dtype="<f8").reshape(d["shape"]).copy()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


def _write(path, doc):
    body = canonical_json(doc)
    doc = dict(doc, content_hash=content_hash(body))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(doc) + "\n")
    return doc["content_hash"]


def _read(path, fmt):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise FileNotFoundError(f"cannot read {path}: {e}") from e
    if doc.get("format") != fmt:
        raise ValueError(f"{path} is not a {fmt} file (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported {fmt} version {doc.get('version')!r}")
    stored = doc.pop("content_hash", None)
    if stored != content_hash(canonical_json(doc)):
        raise ValueError(f"{path}: content hash mismatch (file altered or truncated)")
    return doc, stored


def save_policy(path, params: MetaPolicyParams, meta: dict | None = None) -> str:
    """Write a meta-policy; returns its content hash."""
    doc = {
        "format": POLICY_FORMAT,
        "version": VERSION,
        "n_params": params.n_params,
        "hidden": params.hidden,
        "actor": encode_array(params.actor),
        "log_std": encode_array(params.log_std),
        "critic": encode_array(params.critic),
        "init_logits": encode_array(params.init_logits),
        "meta": _jsonable({**params.meta, **(meta or {})}),
    }
    return _write(path, doc)


def load_policy(path) -> MetaPolicyParams:
    doc, h = _read(path, POLICY_FORMAT)
    meta = dict(doc["meta"], content_hash=h)
    return MetaPolicyParams(
        n_params=doc["n_params"],
        actor=decode_array(doc["actor"]),
        log_std=decode_array(doc["log_std"]),
        critic=decode_array(doc["critic"]),
        init_logits=decode_array(doc["init_logits"]),
        hidden=doc["hidden"],
        meta=meta,
    )


def save_init(path, logits, game: str, seed: int, hyperparameters: dict, meta: dict | None = None) -> str:
    """Write an M-MAML initial-logits vector."""
    doc = {
        "format": INIT_FORMAT,
        "version": VERSION,
        "game": game,
        "seed": int(seed),
        "hyperparameters": _jsonable(hyperparameters),
        "logits": [float(x) for x in np.asarray(logits, dtype=float)],
        "meta": _jsonable(meta or {}),
    }
    return _write(path, doc)


def load_init(path) -> tuple[np.ndarray, dict]:
    doc, h = _read(path, INIT_FORMAT)
    doc["content_hash"] = h
    return np.array(doc.pop("logits"), dtype=float), doc
