"""Convert a trained masked-LM checkpoint into a scoring model_dir.

A checkpoint directory must hold the tokenizer vocabulary (``vocab.txt``,
one token per line) and an input-embedding matrix with one row per token,
in any of these containers:

* ``embeddings.npy``      numpy array
* ``model.safetensors``   safetensors file (needs the safetensors package)
* ``pytorch_model.bin``   torch state dict (needs torch)

Only the input-embedding matrix leaves the checkpoint; transformer weights
stay behind.  The output model_dir is bit-compatible with the engine's
loader: little-endian float32, row-major, plus vocab.txt and meta.json.
64-bit weights are truncated to 32-bit with round-to-nearest; the manifest
records the source dtype.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_USR_PREFIX = "usr"
MANIFEST_FILE = "export_manifest.json"
CHUNK_SIZE = 65536
EMBEDDING_KEY_SUFFIX = "word_embeddings.weight"


class ExportError(Exception):
    pass


@dataclass
class ExportManifest:
    source: str
    vocab_size: int
    dim: int
    user_token_count: int
    usr_prefix: str
    source_dtype: str
    sha256: str
    chunk_size: int
    chunk_sha256: list[str]
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "source": self.source,
            "vocab_size": self.vocab_size,
            "dim": self.dim,
            "user_token_count": self.user_token_count,
            "usr_prefix": self.usr_prefix,
            "source_dtype": self.source_dtype,
            "float32_truncation": "round-to-nearest from source dtype",
            "sha256": self.sha256,
            "chunk_size": self.chunk_size,
            "chunk_sha256": self.chunk_sha256,
            "warnings": self.warnings,
        }


def _read_vocab(checkpoint_dir: Path) -> list[str]:
    vocab_path = checkpoint_dir / "vocab.txt"
    if not vocab_path.is_file():
        raise ExportError(f"checkpoint is missing vocab.txt: {checkpoint_dir}")
    lines = vocab_path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ExportError(f"{vocab_path}: empty vocabulary")
    return lines


def _to_numpy(tensor) -> np.ndarray:
    if hasattr(tensor, "detach"):
        tensor = tensor.detach().cpu()
        # half and bfloat16 tensors have no direct numpy counterpart
        if str(tensor.dtype) in ("torch.bfloat16", "torch.float16"):
            tensor = tensor.float()
        return tensor.numpy()
    return np.asarray(tensor)


def _pick_embedding_tensor(tensors: dict, vocab_size: int, origin: str) -> np.ndarray:
    named = [
        (k, v) for k, v in tensors.items() if str(k).endswith(EMBEDDING_KEY_SUFFIX)
    ]
    if len(named) == 1:
        return _to_numpy(named[0][1])
    candidates = [
        (k, v)
        for k, v in tensors.items()
        if getattr(v, "ndim", 0) == 2 and v.shape[0] == vocab_size
    ]
    if len(candidates) == 1:
        return _to_numpy(candidates[0][1])
    if not candidates:
        raise ExportError(
            f"{origin}: no 2-D tensor with {vocab_size} rows; cannot locate the "
            "input-embedding matrix"
        )
    keys = sorted(k for k, _ in candidates)
    raise ExportError(f"{origin}: ambiguous embedding candidates {keys}")


def _load_embeddings(checkpoint_dir: Path, vocab_size: int) -> np.ndarray:
    npy = checkpoint_dir / "embeddings.npy"
    if npy.is_file():
        return np.load(npy)
    st = checkpoint_dir / "model.safetensors"
    if st.is_file():
        try:
            from safetensors.numpy import load_file
        except ImportError as exc:
            raise ExportError("safetensors checkpoint needs the safetensors package") from exc
        return _pick_embedding_tensor(load_file(st), vocab_size, str(st))
    bin_path = checkpoint_dir / "pytorch_model.bin"
    if bin_path.is_file():
        try:
            import torch
        except ImportError as exc:
            raise ExportError("pytorch_model.bin needs the torch package") from exc
        state = torch.load(bin_path, map_location="cpu", weights_only=True)
        tensors = {k: v for k, v in state.items() if hasattr(v, "shape")}
        return _pick_embedding_tensor(tensors, vocab_size, str(bin_path))
    raise ExportError(
        f"no embedding container in {checkpoint_dir} "
        "(expected embeddings.npy, model.safetensors, or pytorch_model.bin)"
    )


def _chunked_sha256(data: bytes, chunk_size: int = CHUNK_SIZE) -> tuple[str, list[str]]:
    total = hashlib.sha256(data).hexdigest()
    chunks = [
        hashlib.sha256(data[i : i + chunk_size]).hexdigest()
        for i in range(0, len(data), chunk_size)
    ]
    return total, chunks


def export(checkpoint_dir, out_model_dir, usr_prefix: str = DEFAULT_USR_PREFIX) -> ExportManifest:
    """Write vocab.txt, embeddings.f32, meta.json and a manifest.

    The source checkpoint is read-only; a missing user-token set is a
    warning (the engine will simply skip every user), a row-count mismatch
    is fatal.
    """
    checkpoint_dir = Path(checkpoint_dir)
    out_model_dir = Path(out_model_dir)
    vocab = _read_vocab(checkpoint_dir)
    matrix = _load_embeddings(checkpoint_dir, len(vocab))
    if hasattr(matrix, "detach"):
        matrix = matrix.detach().cpu().numpy()
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ExportError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
    if matrix.shape[0] != len(vocab):
        raise ExportError(
            f"vocab has {len(vocab)} tokens but matrix has {matrix.shape[0]} rows"
        )
    source_dtype = str(matrix.dtype)
    out32 = np.ascontiguousarray(matrix.astype("<f4"))
    payload = out32.tobytes()
    total, chunks = _chunked_sha256(payload)
    user_count = sum(1 for t in vocab if t.startswith(usr_prefix))
    warnings = []
    if user_count == 0:
        warnings.append(
            f"no tokens with prefix {usr_prefix!r}; the engine will skip every user"
        )

    out_model_dir.mkdir(parents=True, exist_ok=True)
    (out_model_dir / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    (out_model_dir / "embeddings.f32").write_bytes(payload)
    meta = {
        "dim": int(out32.shape[1]),
        "vocab_size": len(vocab),
        "usr_prefix": usr_prefix,
        "hash": "sha1-hex-10",
        "lowercase": True,
    }
    (out_model_dir / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    manifest = ExportManifest(
        source=str(checkpoint_dir),
        vocab_size=len(vocab),
        dim=int(out32.shape[1]),
        user_token_count=user_count,
        usr_prefix=usr_prefix,
        source_dtype=source_dtype,
        sha256=total,
        chunk_size=CHUNK_SIZE,
        chunk_sha256=chunks,
        warnings=warnings,
    )
    (out_model_dir / MANIFEST_FILE).write_text(
        json.dumps(manifest.as_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return manifest


REQUIRED_META_KEYS = ("dim", "vocab_size", "usr_prefix", "hash", "lowercase")


def verify_problems(model_dir) -> list[str]:
    """Audit an exported model_dir; an empty list means it checks out.

    Recomputes the chunked checksum against the manifest (a flipped byte
    is localized to its chunk offset), validates the meta.json schema, and
    spot-checks ten seeded rows for finiteness.
    """
    model_dir = Path(model_dir)
    problems: list[str] = []
    meta_path = model_dir / "meta.json"
    manifest_path = model_dir / MANIFEST_FILE
    emb_path = model_dir / "embeddings.f32"
    vocab_path = model_dir / "vocab.txt"
    for p in (meta_path, manifest_path, emb_path, vocab_path):
        if not p.is_file():
            problems.append(f"missing {p.name}")
    if problems:
        return problems
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        return [f"meta.json: invalid JSON ({exc})"]
    for key in REQUIRED_META_KEYS:
        if key not in meta:
            problems.append(f"meta.json: missing key {key!r}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        return problems + [f"{MANIFEST_FILE}: invalid JSON ({exc})"]
    data = emb_path.read_bytes()
    expected = int(meta.get("vocab_size", 0)) * int(meta.get("dim", 0)) * 4
    if expected and len(data) != expected:
        problems.append(
            f"embeddings.f32: {len(data)} bytes, expected {expected}"
        )
    chunk_size = int(manifest.get("chunk_size", CHUNK_SIZE))
    total, chunks = _chunked_sha256(data, chunk_size)
    if total != manifest.get("sha256"):
        problems.append("embeddings.f32: checksum mismatch")
        recorded = manifest.get("chunk_sha256", [])
        for i, digest in enumerate(chunks):
            if i >= len(recorded) or digest != recorded[i]:
                problems.append(
                    f"first differing chunk at byte offset {i * chunk_size}"
                )
                break
    dim = int(meta.get("dim", 0))
    vocab_size = int(meta.get("vocab_size", 0))
    if dim >= 1 and vocab_size >= 1 and len(data) == expected:
        matrix = np.frombuffer(data, dtype="<f4").reshape(vocab_size, dim)
        rng = np.random.default_rng(0)
        rows = rng.integers(0, vocab_size, size=min(10, vocab_size))
        for r in rows:
            if not np.isfinite(matrix[int(r)]).all():
                problems.append(f"non-finite values in row {int(r)}")
    return problems


def verify(model_dir) -> bool:
    return not verify_problems(model_dir)
