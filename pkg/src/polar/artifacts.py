"""Run-folder artifact writers.

All writers are deterministic: fixed column orders, sorted JSON keys, LF
line endings, shortest round-trip float formatting, literal NaN for
degenerate cells, and lowercase true/false for booleans.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .association import ScoreRow
from .store import UserRecord

SCORES_HEADER = [
    "user_id",
    "pair",
    "s",
    "p_perm",
    "n_posts",
    "n_pos_attr",
    "n_neg_attr",
    "label_majority",
    "targets",
    "signif_bh_fdr_0.05",
]

USERS_HEADER = ["user_id", "n_posts", "token", "label_majority", "targets"]


def fmt_float(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NaN"
    return repr(float(x))


def fmt_bool(x: bool) -> str:
    return "true" if x else "false"


def fmt_opt(x: str | None) -> str:
    return "" if x is None else str(x)


def write_per_user_scores(path, rows: list[ScoreRow]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORES_HEADER)
        for r in rows:
            w.writerow(
                [
                    r.user_id,
                    r.pair,
                    fmt_float(r.s),
                    fmt_float(r.p_perm),
                    r.n_posts,
                    r.n_pos_attr,
                    r.n_neg_attr,
                    fmt_opt(r.label_majority),
                    fmt_opt(r.targets),
                    fmt_bool(r.signif_bh),
                ]
            )


def write_users_csv(path, users: list[UserRecord]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(USERS_HEADER)
        for u in users:
            w.writerow(
                [u.user_id, u.n_posts, u.token, fmt_opt(u.label_majority), fmt_opt(u.targets)]
            )


def write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n",
        encoding="utf-8",
    )


def json_safe(x):
    """Recursively replace NaN/inf with None so JSON stays strict."""
    if isinstance(x, dict):
        return {k: json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_tsv(path, header: list[str], rows) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(str(c) for c in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
