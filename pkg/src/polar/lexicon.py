"""Attribute pairs: load, embed via subword averaging, and sanity-check.

An attribute pair names a semantic axis through two lists of lexical items.
Items are embedded as the L2-normalized mean of their surviving wordpiece
vectors; items that lose every piece to tokenization are dropped and
reported through coverage counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptySideError, InputError
from .store import EmbeddingTable
from .wordpiece import TokenizerConfig, tokenize_phrase

# Healthy axes sit well below this; near-1 centroid cosine means the two
# sides are not separated in embedding space.
CENTROID_COS_WARN = 0.95
COVERAGE_LOSS_WARN = 0.5


@dataclass
class AttributePair:
    """A named axis with embedded unit-vector matrices for both sides."""

    name: str
    items_A: list[str]
    items_B: list[str]
    A_matrix: np.ndarray
    B_matrix: np.ndarray
    kept_A: list[str]
    kept_B: list[str]
    centroid_cos: float
    warnings: list[str] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.kept_A)

    @property
    def n(self) -> int:
        return len(self.kept_B)


def embed_item(table: EmbeddingTable, cfg: TokenizerConfig, item: str) -> np.ndarray | None:
    """L2-normalized mean of the item's surviving subword rows.

    Returns None when no subword survives or the mean is the zero vector;
    absence is a value that feeds coverage, not an error.
    """
    pieces = tokenize_phrase(cfg, item)
    if not pieces:
        return None
    rows = table.matrix[[cfg.vocab_index[t] for t in pieces]].astype(np.float64)
    mean = rows.mean(axis=0)
    nrm = float(np.linalg.norm(mean))
    if nrm == 0.0:
        return None
    return mean / nrm


def _dedup(items: list[str]) -> list[str]:
    # Exact-match dedup after lowercasing, first occurrence kept.
    seen: set[str] = set()
    out: list[str] = []
    for it in items:
        key = it.strip().lower()
        if key and key not in seen:
            seen.add(key)
            out.append(it)
    return out


def build_pair(
    table: EmbeddingTable,
    cfg: TokenizerConfig,
    name: str,
    items_A: list[str],
    items_B: list[str],
) -> AttributePair:
    """Embed both sides, record survivors, and run axis sanity checks."""
    if not items_A or not items_B:
        raise InputError(f"pair {name!r}: both item lists must be nonempty")
    items_A = _dedup(items_A)
    items_B = _dedup(items_B)
    kept_A, vecs_A = [], []
    for it in items_A:
        v = embed_item(table, cfg, it)
        if v is not None:
            kept_A.append(it)
            vecs_A.append(v)
    kept_B, vecs_B = [], []
    for it in items_B:
        v = embed_item(table, cfg, it)
        if v is not None:
            kept_B.append(it)
            vecs_B.append(v)
    if not vecs_A or not vecs_B:
        side = "A" if not vecs_A else "B"
        raise EmptySideError(f"pair {name!r}: no item on side {side} survived tokenization")
    A = np.vstack(vecs_A)
    B = np.vstack(vecs_B)
    a_bar = A.mean(axis=0)
    b_bar = B.mean(axis=0)
    na, nb = np.linalg.norm(a_bar), np.linalg.norm(b_bar)
    warnings: list[str] = []
    if na == 0.0 or nb == 0.0:
        centroid_cos = float("nan")
        warnings.append(f"pair {name!r}: zero centroid, separability undefined")
    else:
        centroid_cos = float(np.dot(a_bar, b_bar) / (na * nb))
    if centroid_cos > CENTROID_COS_WARN:
        warnings.append(
            f"pair {name!r}: centroid cosine {centroid_cos:.3f} > {CENTROID_COS_WARN}, "
            "sides are poorly separated"
        )
    for side, items, kept in (("A", items_A, kept_A), ("B", items_B, kept_B)):
        lost = 1.0 - len(kept) / len(items)
        if lost > COVERAGE_LOSS_WARN:
            warnings.append(
                f"pair {name!r}: side {side} lost {lost:.0%} of items to tokenization"
            )
    return AttributePair(
        name=name,
        items_A=items_A,
        items_B=items_B,
        A_matrix=A,
        B_matrix=B,
        kept_A=kept_A,
        kept_B=kept_B,
        centroid_cos=centroid_cos,
        warnings=warnings,
    )


def load_lexicon(path) -> list[dict]:
    """Parse a lexicon file: JSON array of {"name", "A", "B"} objects."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, list):
        raise InputError(f"{path}: expected a JSON array of pair objects")
    names = set()
    out = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or not {"name", "A", "B"} <= set(entry):
            raise InputError(f"{path}: entry {i} must be an object with name/A/B")
        name = str(entry["name"])
        if name in names:
            raise InputError(f"{path}: duplicate pair name {name!r}")
        names.add(name)
        out.append({"name": name, "A": [str(x) for x in entry["A"]], "B": [str(x) for x in entry["B"]]})
    return out


def build_pairs_from_lexicon(table: EmbeddingTable, cfg: TokenizerConfig, path) -> list[AttributePair]:
    return [build_pair(table, cfg, e["name"], e["A"], e["B"]) for e in load_lexicon(path)]
