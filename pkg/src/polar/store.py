"""Embedding table persistence and deterministic user-token resolution.

A model_dir holds three files:

* ``vocab.txt``      UTF-8, one token per line, line i <-> matrix row i
* ``embeddings.f32`` little-endian 32-bit floats, row-major V x d
* ``meta.json``      run metadata: dim, vocab_size, usr_prefix, hash,
                     lowercase flag

Tables are immutable after load and safe for concurrent reads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DegenerateVectorError,
    InputError,
    LoadError,
    MissingUserTokenError,
    TokenCollisionError,
)

VOCAB_FILE = "vocab.txt"
EMBEDDINGS_FILE = "embeddings.f32"
META_FILE = "meta.json"

DEFAULT_USR_PREFIX = "usr"
HASH_SCHEME = "sha1-hex-10"


@dataclass
class UserRecord:
    """One author: opaque id, hashed token, and optional scoring metadata."""

    user_id: str
    token: str
    n_posts: int = 0
    label_majority: str | None = None
    targets: str | None = None
    vector: np.ndarray | None = None


class EmbeddingTable:
    """Vocabulary-indexed matrix of d-dimensional float32 vectors.

    Validates on construction: no duplicate tokens, row count matches the
    vocabulary, every entry finite.  The matrix is made read-only so the
    table can be shared across workers.
    """

    def __init__(self, vocab: Iterable[str], matrix, meta: Mapping | None = None):
        vocab = list(vocab)
        matrix = np.array(matrix, dtype=np.float32, order="C", copy=True)
        if matrix.ndim != 2:
            raise LoadError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
        if matrix.shape[0] != len(vocab):
            raise LoadError(
                f"vocab has {len(vocab)} tokens but matrix has {matrix.shape[0]} rows"
            )
        if matrix.shape[1] < 1:
            raise LoadError("embedding dimension must be >= 1")
        index: dict[str, int] = {}
        for i, tok in enumerate(vocab):
            if tok in index:
                raise LoadError(f"duplicate vocab token {tok!r} at rows {index[tok]} and {i}")
            index[tok] = i
        bad = np.where(~np.isfinite(matrix).all(axis=1))[0]
        if bad.size:
            row = int(bad[0])
            raise LoadError(f"non-finite embedding at row {row} (token {vocab[row]!r})")
        matrix.setflags(write=False)
        self.vocab = vocab
        self.matrix = matrix
        self.dim = int(matrix.shape[1])
        self.meta = dict(meta or {})
        self.index = index

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __len__(self) -> int:
        return len(self.vocab)

    @property
    def usr_prefix(self) -> str:
        return str(self.meta.get("usr_prefix", DEFAULT_USR_PREFIX))

    @property
    def lowercase(self) -> bool:
        return bool(self.meta.get("lowercase", True))

    def row(self, token: str) -> np.ndarray:
        return self.matrix[self.index[token]]

    def user_tokens(self) -> list[str]:
        pref = self.usr_prefix
        return [t for t in self.vocab if t.startswith(pref)]


def user_token(user_id: str, usr_prefix: str = DEFAULT_USR_PREFIX) -> str:
    """Deterministic private token for an author.

    SHA-1 over the UTF-8 bytes of the raw id, rendered as lowercase hex and
    truncated to 10 characters, appended to ``usr_prefix``.
    """
    if not isinstance(user_id, str) or not user_id:
        raise InputError("user_id must be a nonempty string")
    digest = hashlib.sha1(user_id.encode("utf-8")).hexdigest()
    return usr_prefix + digest[:10]


def resolve_user_tokens(user_ids: Iterable[str], usr_prefix: str = DEFAULT_USR_PREFIX) -> dict[str, str]:
    """Map distinct user ids to tokens, aborting on any hash collision.

    Silent merging would corrupt per-user inference, so a collision is a
    hard error rather than a warning.
    """
    tokens: dict[str, str] = {}
    owner: dict[str, str] = {}
    for uid in user_ids:
        tok = user_token(uid, usr_prefix)
        prev = owner.get(tok)
        if prev is not None and prev != uid:
            raise TokenCollisionError(
                f"user ids {prev!r} and {uid!r} both map to token {tok!r}"
            )
        owner[tok] = uid
        tokens[uid] = tok
    return tokens


def load_table(model_dir) -> EmbeddingTable:
    """Load and validate a model_dir into an :class:`EmbeddingTable`."""
    model_dir = Path(model_dir)
    vocab_path = model_dir / VOCAB_FILE
    emb_path = model_dir / EMBEDDINGS_FILE
    meta_path = model_dir / META_FILE
    for p in (vocab_path, emb_path, meta_path):
        if not p.is_file():
            raise LoadError(f"missing {p.name} in {model_dir}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LoadError(f"{meta_path}: invalid JSON ({exc})") from exc
    try:
        dim = int(meta["dim"])
        vocab_size = int(meta["vocab_size"])
    except KeyError as exc:
        raise LoadError(f"{meta_path}: missing required key {exc}") from exc
    text = vocab_path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != vocab_size:
        raise LoadError(
            f"{vocab_path}: {len(lines)} tokens but meta.json says vocab_size={vocab_size}"
        )
    raw = emb_path.read_bytes()
    expected = vocab_size * dim * 4
    if len(raw) != expected:
        raise LoadError(
            f"{emb_path}: expected {expected} bytes ({vocab_size}x{dim} float32), got {len(raw)}"
        )
    matrix = np.frombuffer(raw, dtype="<f4").reshape(vocab_size, dim)
    return EmbeddingTable(lines, matrix, meta)


def save_table(table: EmbeddingTable, model_dir) -> None:
    """Write a table back to disk; ``load_table`` round-trips bit-exactly."""
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    meta = dict(table.meta)
    meta["dim"] = table.dim
    meta["vocab_size"] = len(table.vocab)
    meta.setdefault("usr_prefix", DEFAULT_USR_PREFIX)
    meta.setdefault("hash", HASH_SCHEME)
    meta.setdefault("lowercase", True)
    (model_dir / VOCAB_FILE).write_text("\n".join(table.vocab) + "\n", encoding="utf-8")
    (model_dir / EMBEDDINGS_FILE).write_bytes(
        np.ascontiguousarray(table.matrix, dtype="<f4").tobytes()
    )
    (model_dir / META_FILE).write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def user_vector(table: EmbeddingTable, rec: UserRecord) -> np.ndarray:
    """Row-normalized embedding of the user token, as float64.

    Raises ``MissingUserTokenError`` when the token is absent (callers skip
    and count such users) and ``DegenerateVectorError`` on a zero row.
    """
    i = table.index.get(rec.token)
    if i is None:
        raise MissingUserTokenError(
            f"token {rec.token!r} (user {rec.user_id!r}) not in vocabulary"
        )
    row = table.matrix[i].astype(np.float64)
    nrm = float(np.linalg.norm(row))
    if nrm == 0.0:
        raise DegenerateVectorError(f"zero-norm embedding for token {rec.token!r}")
    return row / nrm
