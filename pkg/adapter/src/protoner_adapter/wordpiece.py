"""Greedy longest-match WordPiece, matching the consumer's tokenizer.

The bridge reader re-tokenizes every sentence and rejects piece-surface
drift, so this reimplementation must be byte-identical to the consumer
for the same vocabulary file; the test suite checks it against the real
consumer on randomized inputs.
"""
from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass, field
from typing import Sequence

from protoner_adapter.errors import AdapterDataError, AdapterError

CONTINUATION = "##"


@dataclass(frozen=True)
class Vocab:
    pieces: tuple[str, ...]
    case_mode: str = "cased"
    unknown_token: str = "[UNK]"
    sequence_start: str = "[CLS]"
    sequence_end: str = "[SEP]"
    max_word_chars: int = 100
    piece_ids: dict = field(init=False, repr=False, compare=False)
    identifier: str = field(init=False, compare=False)

    def __post_init__(self):
        if self.case_mode not in ("cased", "uncased"):
            raise ValueError(f"case_mode must be cased or uncased, got {self.case_mode!r}")
        if self.unknown_token not in self.pieces:
            raise AdapterDataError(f"vocabulary is missing {self.unknown_token!r}")
        object.__setattr__(self, "piece_ids", {p: i for i, p in enumerate(self.pieces)})
        digest = hashlib.sha256("\n".join(self.pieces).encode("utf-8")).hexdigest()
        object.__setattr__(self, "identifier", f"sha256:{digest[:16]}")

    def __len__(self) -> int:
        return len(self.pieces)

    def normalize(self, word: str) -> str:
        word = "".join(c for c in word if unicodedata.category(c) not in ("Cc", "Cf"))
        if self.case_mode == "uncased":
            word = word.lower()
            word = "".join(
                c for c in unicodedata.normalize("NFD", word)
                if unicodedata.category(c) != "Mn"
            )
        return word

    def wordpiece(self, word: str) -> list[str]:
        """Longest-match-first split; unmatched or oversized words
        collapse to the unknown token."""
        chars = self.normalize(word)
        if not chars or len(chars) > self.max_word_chars:
            return [self.unknown_token]
        pieces: list[str] = []
        start = 0
        while start < len(chars):
            end = len(chars)
            match = None
            while start < end:
                candidate = chars[start:end]
                if start > 0:
                    candidate = CONTINUATION + candidate
                if candidate in self.piece_ids:
                    match = candidate
                    break
                end -= 1
            if match is None:
                return [self.unknown_token]
            pieces.append(match)
            start = end
        return pieces

    def ids_of(self, pieces: Sequence[str]) -> list[int]:
        return [self.piece_ids[p] for p in pieces]

    def delimiter_ids(self) -> tuple[int, int]:
        for token in (self.sequence_start, self.sequence_end):
            if token not in self.piece_ids:
                raise AdapterError(
                    f"vocabulary has no {token!r}; the encoder needs both delimiters"
                )
        return self.piece_ids[self.sequence_start], self.piece_ids[self.sequence_end]


def load_vocab(source: str, case_mode: str = "cased") -> Vocab:
    """One piece per line, order preserved; source is text or a path."""
    if "\n" not in source:
        with open(source, encoding="utf-8") as f:
            source = f.read()
    pieces: list[str] = []
    seen: set[str] = set()
    for lineno, line in enumerate(source.splitlines(), 1):
        if not line:
            raise AdapterDataError(f"vocabulary line {lineno}: empty piece")
        if line in seen:
            raise AdapterDataError(f"vocabulary line {lineno}: duplicate piece {line!r}")
        seen.add(line)
        pieces.append(line)
    return Vocab(tuple(pieces), case_mode=case_mode)


@dataclass(frozen=True)
class Alignment:
    """One sentence fanned out to pieces, with both directions kept."""

    pieces: tuple[str, ...]
    word_index: tuple[int, ...]
    first_piece_index: tuple[int, ...]


def align(words: Sequence[str], vocab: Vocab) -> Alignment:
    pieces: list[str] = []
    word_index: list[int] = []
    first: list[int] = []
    for w, word in enumerate(words):
        first.append(len(pieces))
        for piece in vocab.wordpiece(word):
            pieces.append(piece)
            word_index.append(w)
    return Alignment(tuple(pieces), tuple(word_index), tuple(first))


def chunk_word_ranges(piece_counts: Sequence[int], budget: int) -> list[tuple[int, int]]:
    """Greedy fill at word boundaries under budget - 2 content pieces
    (two slots go to the delimiters)."""
    capacity = budget - 2
    if capacity < 1:
        raise AdapterError(f"budget {budget} leaves no room for content pieces")
    chunks: list[tuple[int, int]] = []
    start = 0
    used = 0
    for w, count in enumerate(piece_counts):
        if count > capacity:
            raise AdapterError(
                f"word {w} spans {count} pieces, over the {capacity}-piece budget"
            )
        if used + count > capacity:
            chunks.append((start, w))
            start, used = w, 0
        used += count
    chunks.append((start, len(piece_counts)))
    return chunks
