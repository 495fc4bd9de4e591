"""Read posts from delimited files and build scoring inputs.

Inclusion rules: users need at least ``min_posts_per_user`` posts to get a
stable vector; the majority label across a user's rows becomes
``label_majority`` (ties break lexicographically).  Only the file's own
user_id and its hashed token are ever echoed downstream.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .rng import rng_from_key
from .store import EmbeddingTable, UserRecord, resolve_user_tokens
from .trajectory import PostSequence
from .wordpiece import config_from_table, encode_phrase

DEFAULT_MIN_POSTS = 2


@dataclass
class Corpus:
    users: list[UserRecord]
    posts_by_user: dict[str, PostSequence]
    dropped_under_min: int
    skipped_missing_token: int
    n_rows: int
    n_malformed: int


def load_corpus(
    posts_path,
    table: EmbeddingTable,
    min_posts_per_user: int = DEFAULT_MIN_POSTS,
) -> Corpus:
    """Parse posts.csv (user_id, text[, label][, t_index]) into a Corpus.

    Text is lowercased and wordpiece-tokenized against the table's
    vocabulary; unknown words drop out.  A provided t_index column fixes
    post order only; stored step indices are the 1..n ranks.  Malformed
    rows are skipped with a count, missing required columns are fatal.
    """
    posts_path = Path(posts_path)
    if not posts_path.is_file():
        raise InputError(f"posts file not found: {posts_path}")
    cfg = config_from_table(table)
    raw_posts: dict[str, list[tuple[int, int, list[int], str | None]]] = {}
    order_seen: list[str] = []
    n_rows = 0
    n_malformed = 0
    with posts_path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        if not {"user_id", "text"} <= cols:
            raise InputError(f"{posts_path}: header must contain user_id and text")
        has_label = "label" in cols
        has_t = "t_index" in cols
        for file_pos, row in enumerate(reader):
            n_rows += 1
            uid = (row.get("user_id") or "").strip()
            text = row.get("text")
            if not uid or text is None:
                n_malformed += 1
                continue
            if has_t and (row.get("t_index") or "").strip():
                try:
                    t_key = int(row["t_index"])
                except ValueError:
                    n_malformed += 1
                    continue
            else:
                t_key = file_pos
            label = (row.get("label") or "").strip() if has_label else None
            ids = encode_phrase(cfg, text) if text.strip() else []
            if uid not in raw_posts:
                order_seen.append(uid)
            raw_posts.setdefault(uid, []).append((t_key, file_pos, ids, label or None))

    tokens = resolve_user_tokens(order_seen, table.usr_prefix)
    users: list[UserRecord] = []
    posts_by_user: dict[str, PostSequence] = {}
    dropped = 0
    missing = 0
    for uid in order_seen:
        entries = sorted(raw_posts[uid], key=lambda e: (e[0], e[1]))
        if len(entries) < min_posts_per_user:
            dropped += 1
            continue
        tok = tokens[uid]
        if tok not in table:
            missing += 1
        labels = [lab for _, _, _, lab in entries if lab is not None]
        label_majority = None
        if labels:
            counts = Counter(labels)
            top = max(counts.values())
            label_majority = min(lab for lab, c in counts.items() if c == top)
        # posts may contain the user's own token only through hash-shaped
        # text; strip it so sequences hold context tokens alone
        own_row = table.index.get(tok)
        seq = PostSequence(
            user_id=uid,
            posts=[
                (rank + 1, [i for i in ids if i != own_row])
                for rank, (_, _, ids, _) in enumerate(entries)
            ],
        )
        users.append(
            UserRecord(
                user_id=uid,
                token=tok,
                n_posts=len(entries),
                label_majority=label_majority,
            )
        )
        posts_by_user[uid] = seq
    return Corpus(
        users=users,
        posts_by_user=posts_by_user,
        dropped_under_min=dropped,
        skipped_missing_token=missing,
        n_rows=n_rows,
        n_malformed=n_malformed,
    )


def optional_post_cap(corpus: Corpus, cap: int | None, seed: int = 123) -> Corpus:
    """Uniformly subsample each user's posts to at most ``cap``.

    Order is preserved; the subsample stream is derived per user so the
    result is independent of iteration order.  No-op when cap is None.
    """
    if cap is None:
        return corpus
    if cap < 1:
        raise InputError("post cap must be >= 1")
    users: list[UserRecord] = []
    posts_by_user: dict[str, PostSequence] = {}
    for rec in corpus.users:
        seq = corpus.posts_by_user[rec.user_id]
        if len(seq.posts) <= cap:
            users.append(rec)
            posts_by_user[rec.user_id] = seq
            continue
        rng = rng_from_key(seed, "post_cap", rec.user_id)
        keep = np.sort(rng.choice(len(seq.posts), size=cap, replace=False))
        posts = [seq.posts[i] for i in keep]
        users.append(
            UserRecord(
                user_id=rec.user_id,
                token=rec.token,
                n_posts=cap,
                label_majority=rec.label_majority,
                targets=rec.targets,
            )
        )
        posts_by_user[rec.user_id] = PostSequence(user_id=rec.user_id, posts=posts)
    return Corpus(
        users=users,
        posts_by_user=posts_by_user,
        dropped_under_min=corpus.dropped_under_min,
        skipped_missing_token=corpus.skipped_missing_token,
        n_rows=corpus.n_rows,
        n_malformed=corpus.n_malformed,
    )
