import csv

import pytest

from polar.errors import InputError
from polar.ingestion import load_corpus, optional_post_cap
from polar.store import user_token

from conftest import make_table


@pytest.fixture
def table():
    return make_table(
        {
            "[UNK]": [0.0, 0.0],
            "hello": [1.0, 0.0],
            "world": [0.0, 1.0],
            "again": [1.0, 1.0],
            user_token("amy"): [1.0, 2.0],
            user_token("ben"): [2.0, 1.0],
        }
    )


def write_posts(path, rows, header=("user_id", "text", "label")):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


class TestLoadCorpus:
    def test_basic_parse_and_tokens(self, tmp_path, table):
        posts = write_posts(
            tmp_path / "p.csv",
            [
                ("amy", "Hello world", "HATE"),
                ("amy", "hello AGAIN", "NOHATE"),
                ("amy", "world", "HATE"),
                ("ben", "hello", ""),
                ("ben", "world again", ""),
            ],
        )
        corpus = load_corpus(posts, table)
        assert [u.user_id for u in corpus.users] == ["amy", "ben"]
        amy = corpus.users[0]
        assert amy.token == user_token("amy")
        assert amy.n_posts == 3
        assert amy.label_majority == "HATE"
        seq = corpus.posts_by_user["amy"]
        assert [t for t, _ in seq.posts] == [1, 2, 3]
        assert seq.posts[0][1] == [table.index["hello"], table.index["world"]]

    def test_majority_tie_breaks_lexicographically(self, tmp_path, table):
        posts = write_posts(
            tmp_path / "p.csv",
            [("amy", "hello", "B"), ("amy", "world", "A"), ("amy", "again", "B"), ("amy", "hello", "A")],
        )
        corpus = load_corpus(posts, table)
        assert corpus.users[0].label_majority == "A"

    def test_min_posts_filter_counts_dropped(self, tmp_path, table):
        posts = write_posts(
            tmp_path / "p.csv",
            [("amy", "hello", ""), ("ben", "hello", ""), ("ben", "world", "")],
        )
        corpus = load_corpus(posts, table, min_posts_per_user=2)
        assert [u.user_id for u in corpus.users] == ["ben"]
        assert corpus.dropped_under_min == 1

    def test_empty_file_empty_corpus(self, tmp_path, table):
        posts = write_posts(tmp_path / "p.csv", [])
        corpus = load_corpus(posts, table)
        assert corpus.users == []
        assert corpus.n_rows == 0
        assert corpus.dropped_under_min == 0

    def test_missing_columns_fatal(self, tmp_path, table):
        path = tmp_path / "p.csv"
        path.write_text("user_id,body\na,b\n")
        with pytest.raises(InputError):
            load_corpus(path, table)

    def test_malformed_rows_counted(self, tmp_path, table):
        posts = write_posts(
            tmp_path / "p.csv",
            [("", "hello", ""), ("amy", "hello", ""), ("amy", "world", "")],
        )
        corpus = load_corpus(posts, table)
        assert corpus.n_malformed == 1
        assert corpus.users[0].n_posts == 2

    def test_t_index_orders_posts(self, tmp_path, table):
        posts = write_posts(
            tmp_path / "p.csv",
            [("amy", "world", "", "5"), ("amy", "hello", "", "2")],
            header=("user_id", "text", "label", "t_index"),
        )
        corpus = load_corpus(posts, table)
        seq = corpus.posts_by_user["amy"]
        # stored step index is rank order; provided t_index only sorts
        assert [t for t, _ in seq.posts] == [1, 2]
        assert seq.posts[0][1] == [table.index["hello"]]

    def test_missing_token_counted(self, tmp_path):
        t = make_table({"[UNK]": [0, 0], "hello": [1.0, 0.0]})
        posts = write_posts(
            tmp_path / "p.csv", [("amy", "hello", ""), ("amy", "hello", "")]
        )
        corpus = load_corpus(posts, t)
        assert corpus.skipped_missing_token == 1
        # user still listed; scoring will skip it
        assert [u.user_id for u in corpus.users] == ["amy"]

    def test_tokenized_sequences_only_contain_vocab_rows(self, tmp_path, table):
        posts = write_posts(
            tmp_path / "p.csv",
            [("amy", "hello unknownword world", ""), ("amy", "zzz", "")],
        )
        corpus = load_corpus(posts, table)
        for _, ids in corpus.posts_by_user["amy"].posts:
            for i in ids:
                assert 0 <= i < len(table)

    def test_deterministic(self, tmp_path, table):
        posts = write_posts(
            tmp_path / "p.csv",
            [("amy", "hello", ""), ("amy", "world", ""), ("ben", "again", ""), ("ben", "hello", "")],
        )
        c1 = load_corpus(posts, table)
        c2 = load_corpus(posts, table)
        assert [u.user_id for u in c1.users] == [u.user_id for u in c2.users]
        assert all(
            c1.posts_by_user[u].posts == c2.posts_by_user[u].posts for u in c1.posts_by_user
        )

    def test_row_accounting_reconciles(self, tmp_path, table):
        # 2 retained posts (amy) + 1 dropped-user post (ben) + 1 malformed
        posts = write_posts(
            tmp_path / "p.csv",
            [("amy", "hello", ""), ("amy", "world", ""), ("ben", "hello", ""), ("", "x", "")],
        )
        corpus = load_corpus(posts, table, min_posts_per_user=2)
        retained_posts = sum(u.n_posts for u in corpus.users)
        dropped_user_posts = 1
        assert corpus.n_rows == retained_posts + dropped_user_posts + corpus.n_malformed
        assert corpus.dropped_under_min == 1


class TestOptionalPostCap:
    @pytest.fixture
    def corpus(self, tmp_path, table):
        rows = [("amy", f"hello world", "") for _ in range(5)] + [
            ("ben", "world", ""),
            ("ben", "again", ""),
        ]
        return load_corpus(write_posts(tmp_path / "p.csv", rows), table)

    def test_cap_above_counts_is_identity(self, corpus):
        capped = optional_post_cap(corpus, 10, seed=1)
        assert capped.posts_by_user["amy"].posts == corpus.posts_by_user["amy"].posts

    def test_none_is_noop(self, corpus):
        assert optional_post_cap(corpus, None) is corpus

    def test_cap_two_keeps_order(self, corpus):
        capped = optional_post_cap(corpus, 2, seed=3)
        posts = capped.posts_by_user["amy"].posts
        assert len(posts) == 2
        assert posts[0][0] < posts[1][0]
        assert capped.users[0].n_posts == 2

    def test_same_seed_same_subsample(self, corpus):
        a = optional_post_cap(corpus, 2, seed=9)
        b = optional_post_cap(corpus, 2, seed=9)
        assert a.posts_by_user["amy"].posts == b.posts_by_user["amy"].posts

    def test_different_seed_can_differ(self, corpus):
        picks = {
            tuple(t for t, _ in optional_post_cap(corpus, 2, seed=s).posts_by_user["amy"].posts)
            for s in range(12)
        }
        assert len(picks) > 1
