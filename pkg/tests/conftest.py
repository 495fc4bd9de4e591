import numpy as np
import pytest

from polar.store import EmbeddingTable, UserRecord, user_token
from polar.wordpiece import TokenizerConfig


def make_table(tokens_rows: dict[str, list[float]], meta=None) -> EmbeddingTable:
    vocab = list(tokens_rows)
    matrix = np.array([tokens_rows[t] for t in vocab], dtype=np.float32)
    base = {"usr_prefix": "usr", "hash": "sha1-hex-10", "lowercase": True}
    base.update(meta or {})
    base["dim"] = matrix.shape[1]
    base["vocab_size"] = len(vocab)
    return EmbeddingTable(vocab, matrix, base)


def make_user(user_id: str, n_posts: int = 2, **kw) -> UserRecord:
    return UserRecord(user_id=user_id, token=user_token(user_id), n_posts=n_posts, **kw)


@pytest.fixture
def tiny_table() -> EmbeddingTable:
    return make_table(
        {
            "[UNK]": [0.0, 0.0],
            "hello": [1.0, 0.0],
            "##there": [0.0, 1.0],
            "world": [0.5, 0.5],
            user_token("alice"): [3.0, 4.0],
            user_token("bob"): [0.0, 2.0],
            user_token("zero"): [0.0, 0.0],
        }
    )


@pytest.fixture
def tiny_cfg(tiny_table) -> TokenizerConfig:
    return TokenizerConfig(vocab_index=tiny_table.index)
