import hashlib

import numpy as np
import pytest

from polar.errors import (
    DegenerateVectorError,
    InputError,
    LoadError,
    MissingUserTokenError,
    TokenCollisionError,
)
from polar.store import (
    EmbeddingTable,
    load_table,
    resolve_user_tokens,
    save_table,
    user_token,
    user_vector,
)

from conftest import make_table, make_user


class TestUserToken:
    def test_known_digest(self):
        # sha1("a") begins 86f7e437fa..., checked against hashlib directly
        assert user_token("a", "usr") == "usr86f7e437fa"
        assert user_token("a", "usr") == "usr" + hashlib.sha1(b"a").hexdigest()[:10]

    def test_deterministic(self):
        assert user_token("someone") == user_token("someone")

    def test_distinct_ids_distinct_tokens(self):
        assert user_token("a") != user_token("b")

    def test_empty_id_rejected(self):
        with pytest.raises(InputError):
            user_token("")

    def test_unicode_id_hashes_utf8_bytes(self):
        uid = "usuário"
        expect = "usr" + hashlib.sha1(uid.encode("utf-8")).hexdigest()[:10]
        assert user_token(uid) == expect

    def test_injective_on_large_id_set(self):
        ids = [f"user-{i}" for i in range(10_000)]
        tokens = resolve_user_tokens(ids)
        assert len(set(tokens.values())) == len(ids)

    def test_collision_aborts_registry(self, monkeypatch):
        import polar.store as store

        monkeypatch.setattr(store, "user_token", lambda uid, pref="usr": pref + "fixed")
        with pytest.raises(TokenCollisionError):
            resolve_user_tokens(["a", "b"])


class TestTableValidation:
    def test_duplicate_token_rejected(self):
        with pytest.raises(LoadError, match="dup"):
            EmbeddingTable(["dup", "dup"], np.eye(2, 3))

    def test_row_count_mismatch(self):
        with pytest.raises(LoadError):
            EmbeddingTable(["a"], np.eye(2, 3))

    def test_non_finite_names_row(self):
        m = np.eye(3, 2)
        m[1, 0] = np.nan
        with pytest.raises(LoadError, match="row 1"):
            EmbeddingTable(["a", "b", "c"], m)

    def test_matrix_is_read_only(self, tiny_table):
        with pytest.raises(ValueError):
            tiny_table.matrix[0, 0] = 1.0


class TestLoadSave:
    def test_round_trip_bit_exact(self, tmp_path, tiny_table):
        save_table(tiny_table, tmp_path / "m")
        again = load_table(tmp_path / "m")
        assert again.vocab == tiny_table.vocab
        assert again.matrix.tobytes() == tiny_table.matrix.tobytes()
        assert again.dim == tiny_table.dim
        save_table(again, tmp_path / "m2")
        for name in ("vocab.txt", "embeddings.f32", "meta.json"):
            assert (tmp_path / "m" / name).read_bytes() == (tmp_path / "m2" / name).read_bytes()

    def test_fixture_shape(self, tmp_path):
        t = make_table({"a": [1, 2], "b": [3, 4], "c": [5, 6]})
        save_table(t, tmp_path / "m")
        loaded = load_table(tmp_path / "m")
        assert len(loaded) == 3 and loaded.dim == 2

    def test_truncated_embeddings_rejected(self, tmp_path, tiny_table):
        save_table(tiny_table, tmp_path / "m")
        emb = tmp_path / "m" / "embeddings.f32"
        emb.write_bytes(emb.read_bytes()[:-4])
        with pytest.raises(LoadError, match="bytes"):
            load_table(tmp_path / "m")

    def test_duplicate_vocab_line_named(self, tmp_path, tiny_table):
        save_table(tiny_table, tmp_path / "m")
        vocab = tmp_path / "m" / "vocab.txt"
        lines = vocab.read_text().splitlines()
        lines[1] = lines[0]
        vocab.write_text("\n".join(lines) + "\n")
        with pytest.raises(LoadError, match="\\[UNK\\]"):
            load_table(tmp_path / "m")

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError, match="vocab.txt"):
            load_table(tmp_path)


class TestUserVector:
    def test_three_four_five(self, tiny_table):
        v = user_vector(tiny_table, make_user("alice"))
        np.testing.assert_allclose(v, [0.6, 0.8], atol=1e-7)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-6

    def test_unit_row_unchanged(self):
        t = make_table({"[UNK]": [0, 0], user_token("u"): [1.0, 0.0]})
        v = user_vector(t, make_user("u"))
        np.testing.assert_allclose(v, [1.0, 0.0], atol=1e-7)

    def test_zero_row_degenerate(self, tiny_table):
        with pytest.raises(DegenerateVectorError):
            user_vector(tiny_table, make_user("zero"))

    def test_missing_token(self, tiny_table):
        with pytest.raises(MissingUserTokenError):
            user_vector(tiny_table, make_user("nobody"))

    def test_norm_one_for_random_rows(self):
        rng = np.random.default_rng(7)
        rows = {"[UNK]": [0.0] * 8}
        ids = [f"u{i}" for i in range(50)]
        for uid in ids:
            rows[user_token(uid)] = list(rng.normal(size=8))
        t = make_table(rows)
        for uid in ids:
            v = user_vector(t, make_user(uid))
            assert abs(np.linalg.norm(v) - 1.0) < 1e-6
