"""Greedy longest-match-first wordpiece segmentation.

Maps lexical items (unigrams and phrases) to subword sequences over the
trained vocabulary.  Pre-tokenization is intentionally minimal: lowercase
(if configured), strip, split on whitespace, and split punctuation
characters into their own words when adjacent to letters.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Mapping

from .errors import InputError
from .store import EmbeddingTable


@dataclass(frozen=True)
class TokenizerConfig:
    vocab_index: Mapping[str, int]
    continuation_prefix: str = "##"
    unk_token: str = "[UNK]"
    lowercase: bool = True
    max_chars_per_word: int = 100

    def __post_init__(self):
        if self.unk_token not in self.vocab_index:
            raise InputError(f"unk_token {self.unk_token!r} not in vocabulary")
        if self.max_chars_per_word < 1:
            raise InputError("max_chars_per_word must be positive")


def config_from_table(table: EmbeddingTable, **overrides) -> TokenizerConfig:
    """Tokenizer over the same vocabulary (and row order) as the table."""
    kwargs = {"vocab_index": table.index, "lowercase": table.lowercase}
    kwargs.update(overrides)
    return TokenizerConfig(**kwargs)


def _is_punctuation(ch: str) -> bool:
    # BERT convention: ASCII symbol ranges count as punctuation too.
    cp = ord(ch)
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(ch).startswith("P")


def pretokenize(cfg: TokenizerConfig, text: str) -> list[str]:
    """Split text into words: lowercase, whitespace split, punctuation split."""
    if cfg.lowercase:
        text = text.lower()
    words: list[str] = []
    for chunk in text.strip().split():
        buf = []
        for ch in chunk:
            if _is_punctuation(ch):
                if buf:
                    words.append("".join(buf))
                    buf = []
                words.append(ch)
            else:
                buf.append(ch)
        if buf:
            words.append("".join(buf))
    return words


def tokenize_word(cfg: TokenizerConfig, word: str) -> list[str] | None:
    """Segment one word greedily, longest vocabulary prefix first.

    Returns the piece list, or None when the word cannot be segmented
    (the unknown marker: a value, not an error).
    """
    if cfg.lowercase:
        word = word.lower()
    word = word.strip()
    if not word:
        raise InputError("word is empty after normalization")
    if len(word) > cfg.max_chars_per_word:
        return None
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        piece = None
        while start < end:
            cand = word[start:end]
            if start > 0:
                cand = cfg.continuation_prefix + cand
            if cand in cfg.vocab_index:
                piece = cand
                break
            end -= 1
        if piece is None:
            return None
        pieces.append(piece)
        start = end
    return pieces


def tokenize_phrase(cfg: TokenizerConfig, phrase: str) -> list[str]:
    """Segment a phrase word by word, dropping unknown words.

    Dropped words are surfaced upstream through coverage counts; the result
    may be empty.
    """
    if not phrase or not phrase.strip():
        raise InputError("phrase must be nonempty")
    out: list[str] = []
    for word in pretokenize(cfg, phrase):
        pieces = tokenize_word(cfg, word)
        if pieces is not None:
            out.extend(pieces)
    return out


def encode_phrase(cfg: TokenizerConfig, phrase: str) -> list[int]:
    """Vocabulary row ids for a phrase (unknown words dropped)."""
    return [cfg.vocab_index[t] for t in tokenize_phrase(cfg, phrase)]
