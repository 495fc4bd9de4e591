#!/usr/bin/env python3
"""Walkthrough: checkpoint export and audit.

Builds a toy checkpoint (vocabulary plus embedding matrix, the shape a
masked-LM training run leaves behind), exports it into the engine's
model_dir format, proves the engine reads it back bit-exactly, and shows
the audit catching a single flipped byte.

Needs both packages installed: the engine and exporter/.
Run from anywhere: python demos/05_export_roundtrip.py
"""

import tempfile
from pathlib import Path

import numpy as np

from polar import load_table, user_token
from polar_export import export, verify, verify_problems

work = Path(tempfile.mkdtemp(prefix="demo_export_"))
print(f"working under {work}\n")

# --- a fake training artifact ---------------------------------------------
rng = np.random.default_rng(5)
vocab = ["[UNK]", "alpha", "beta", "gamma", user_token("ann"), user_token("bo")]
matrix = rng.normal(size=(len(vocab), 16)).astype(np.float64)  # 64-bit source
ckpt = work / "ckpt"
ckpt.mkdir()
(ckpt / "vocab.txt").write_text("\n".join(vocab) + "\n")
np.save(ckpt / "embeddings.npy", matrix)

# --- export ---------------------------------------------------------------
model_dir = work / "model"
manifest = export(ckpt, model_dir)
print(f"exported: {manifest.vocab_size} tokens x {manifest.dim} dims, "
      f"{manifest.user_token_count} user tokens")
print(f"source dtype {manifest.source_dtype} -> float32 on disk")
print(f"checksum {manifest.sha256[:16]}... over "
      f"{(model_dir / 'embeddings.f32').stat().st_size} bytes")

# --- the engine reads it back bit-exactly ----------------------------------
table = load_table(model_dir)
assert table.vocab == vocab
assert table.matrix.tobytes() == matrix.astype("<f4").tobytes()
print("\nengine load_table round-trip: bit-exact")

# --- audit catches corruption ----------------------------------------------
print("fresh export verifies:", verify(model_dir))
emb = model_dir / "embeddings.f32"
data = bytearray(emb.read_bytes())
data[33] ^= 0xFF
emb.write_bytes(bytes(data))
print("after flipping one byte:", verify(model_dir))
for problem in verify_problems(model_dir):
    print("  ", problem)
