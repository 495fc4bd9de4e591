#!/usr/bin/env python3
"""Walkthrough: score a small corpus end to end.

Builds a toy embedding space on disk (the same three-file model_dir layout
a checkpoint export produces), writes a posts file and a lexicon, then
runs the scoring pipeline and reads the artifacts back.

Run from anywhere: python demos/01_score_a_corpus.py
"""

import csv
import json
import tempfile
from pathlib import Path

import numpy as np

from polar import (
    EmbeddingTable,
    PermutationConfig,
    load_corpus,
    save_table,
    score_all,
    user_token,
)
from polar.cli import main as polar_cli
from polar.lexicon import build_pairs_from_lexicon
from polar.wordpiece import config_from_table

work = Path(tempfile.mkdtemp(prefix="demo_score_"))
print(f"working under {work}\n")

# --- 1. a tiny embedding space -------------------------------------------
# Two anchor directions: "promo" words along e0, "chat" words along e1.
# Half the users lean promo, half lean chat; their token rows sit near the
# matching anchor.
rng = np.random.default_rng(7)
dim = 12
users = [f"acct{i}" for i in range(10)]
vocab, rows = ["[UNK]"], [np.zeros(dim)]
for i in range(5):
    v = np.zeros(dim)
    v[0] = 1.0
    vocab.append(f"promo{i}")
    rows.append(v + 0.1 * rng.normal(size=dim))
    w = np.zeros(dim)
    w[1] = 1.0
    vocab.append(f"chat{i}")
    rows.append(w + 0.1 * rng.normal(size=dim))
for i, uid in enumerate(users):
    lean = np.zeros(dim)
    lean[0 if i % 2 == 0 else 1] = 1.0
    vocab.append(user_token(uid))
    rows.append(lean + 0.4 * rng.normal(size=dim))

table = EmbeddingTable(
    vocab,
    np.vstack(rows),
    meta={"dim": dim, "vocab_size": len(vocab), "usr_prefix": "usr",
          "hash": "sha1-hex-10", "lowercase": True},
)
model_dir = work / "model"
save_table(table, model_dir)
print(f"model_dir written: {len(vocab)} tokens, dim {dim}")

# --- 2. posts and an attribute lexicon ------------------------------------
posts_path = work / "posts.csv"
with posts_path.open("w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["user_id", "text", "label"])
    for i, uid in enumerate(users):
        label = "promoter" if i % 2 == 0 else "chatter"
        w.writerow([uid, "promo0 promo1 chat3", label])
        w.writerow([uid, "chat0 promo2", label])

lexicon_path = work / "lexicon.json"
lexicon_path.write_text(json.dumps([
    {"name": "promo_vs_chat",
     "A": [f"promo{i}" for i in range(5)],
     "B": [f"chat{i}" for i in range(5)]},
]))

# --- 3. score through the library API -------------------------------------
corpus = load_corpus(posts_path, table)
pairs = build_pairs_from_lexicon(table, config_from_table(table), lexicon_path)
print(f"\npair {pairs[0].name!r}: m={pairs[0].m}, n={pairs[0].n}, "
      f"centroid cosine {pairs[0].centroid_cos:.3f}")

cfg = PermutationConfig(M=2000, master_seed=123, alpha=0.05)
result = score_all(table, corpus.users, pairs, cfg)
print("\nuser_id    s        p_perm   significant")
for row in result.rows:
    print(f"{row.user_id:<9}  {row.s:+.3f}   {row.p_perm:.4f}   {row.signif_bh}")

# --- 4. same thing through the CLI ----------------------------------------
out = work / "run"
rc = polar_cli([
    "score",
    "--model-dir", str(model_dir),
    "--posts", str(posts_path),
    "--lexicon", str(lexicon_path),
    "--out", str(out),
])
assert rc == 0
print("\nartifacts:", ", ".join(sorted(p.name for p in out.iterdir())))
print("first scores row:", (out / "per_user_scores.csv").read_text().splitlines()[1])
