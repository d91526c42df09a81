"""Subword tokenization with word-level alignment.

Greedy longest-match-first piece matching against a fixed vocabulary,
continuation pieces marked with the "##" prefix. Labels live on the
first piece of each word; continuation pieces are masked out of loss
and scoring. Long sentences are chunked at word boundaries so each
chunk plus the two sequence delimiters fits the encoder input budget.
"""
from __future__ import annotations

import hashlib
import io
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO, Union

from protoner.corpus.types import BioTag, Corpus, Sentence
from protoner.errors import ChunkError, VocabError

CONTINUATION_PREFIX = "##"


@dataclass(frozen=True)
class Vocabulary:
    """An ordered piece inventory plus tokenization policy.

    The identifier is a content hash over the pieces; exporters and
    consumers of bridge files compare it to catch vocabulary drift.
    """

    pieces: tuple[str, ...]
    unknown_token: str = "[UNK]"
    sequence_start: str = "[CLS]"
    sequence_end: str = "[SEP]"
    max_word_chars: int = 100
    case_mode: str = "cased"
    piece_set: frozenset = field(init=False, repr=False, compare=False)
    identifier: str = field(init=False, compare=False)

    def __post_init__(self):
        if self.case_mode not in ("cased", "uncased"):
            raise ValueError(f"case_mode must be cased or uncased, got {self.case_mode!r}")
        if self.max_word_chars < 1:
            raise ValueError("max_word_chars must be at least 1")
        if len(set(self.pieces)) != len(self.pieces):
            raise VocabError("duplicate pieces in vocabulary")
        if self.unknown_token not in self.pieces:
            raise VocabError(f"vocabulary is missing the unknown token {self.unknown_token!r}")
        object.__setattr__(self, "piece_set", frozenset(self.pieces))
        digest = hashlib.sha256("\n".join(self.pieces).encode("utf-8")).hexdigest()
        object.__setattr__(self, "identifier", f"sha256:{digest[:16]}")

    def __len__(self) -> int:
        return len(self.pieces)

    def normalize_word(self, word: str) -> str:
        """Case/accent/control normalization applied before matching."""
        word = "".join(c for c in word if unicodedata.category(c) not in ("Cc", "Cf"))
        if self.case_mode == "uncased":
            word = word.lower()
            word = "".join(
                c for c in unicodedata.normalize("NFD", word)
                if unicodedata.category(c) != "Mn"
            )
        return word


def load_vocab(source: Union[str, TextIO], case_mode: str = "cased", **kwargs) -> Vocabulary:
    """Read one piece per line; order is preserved, duplicates rejected."""
    if hasattr(source, "read"):
        source = source.read()
    pieces: list[str] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(source.splitlines(), 1):
        piece = line.rstrip("\n")
        if not piece:
            raise VocabError(f"line {lineno}: empty piece")
        if piece in seen:
            raise VocabError(f"line {lineno}: duplicate piece {piece!r} (first at line {seen[piece]})")
        seen[piece] = lineno
        pieces.append(piece)
    return Vocabulary(tuple(pieces), case_mode=case_mode, **kwargs)


def wordpiece_tokenize(word: str, vocab: Vocabulary) -> list[str]:
    """Greedy longest-match-first split of one word into pieces.

    Pieces after the first must carry the continuation prefix. If any
    position fails to match, or the word is longer than max_word_chars,
    the whole word collapses to the unknown token.
    """
    if not word or any(c.isspace() for c in word):
        raise ValueError(f"word must be non-empty without whitespace: {word!r}")
    chars = vocab.normalize_word(word)
    if not chars or len(chars) > vocab.max_word_chars:
        return [vocab.unknown_token]

    pieces = []
    start = 0
    while start < len(chars):
        end = len(chars)
        match = None
        while start < end:
            candidate = chars[start:end]
            if start > 0:
                candidate = CONTINUATION_PREFIX + candidate
            if candidate in vocab.piece_set:
                match = candidate
                break
            end -= 1
        if match is None:
            return [vocab.unknown_token]
        pieces.append(match)
        start = end
    return pieces


@dataclass(frozen=True)
class AlignedSentence:
    """A sentence fanned out into pieces, with both alignment directions."""

    sentence: Sentence
    pieces: tuple[str, ...]
    word_index: tuple[int, ...]  # per piece: source word
    first_piece_index: tuple[int, ...]  # per word: its first piece

    def __post_init__(self):
        if len(self.pieces) != len(self.word_index):
            raise ValueError("pieces and word_index lengths differ")
        if len(self.first_piece_index) != len(self.sentence):
            raise ValueError("first_piece_index must cover every word")

    @property
    def piece_count(self) -> int:
        return len(self.pieces)

    def pieces_of_word(self, word: int) -> tuple[str, ...]:
        start = self.first_piece_index[word]
        end = (
            self.first_piece_index[word + 1]
            if word + 1 < len(self.first_piece_index)
            else len(self.pieces)
        )
        return self.pieces[start:end]


def tokenize_sentence(sentence: Sentence, vocab: Vocabulary) -> AlignedSentence:
    """Tokenize each word and record the word <-> piece alignment."""
    pieces: list[str] = []
    word_index: list[int] = []
    first_piece_index: list[int] = []
    for w, token in enumerate(sentence.tokens):
        first_piece_index.append(len(pieces))
        for piece in wordpiece_tokenize(token.text, vocab):
            pieces.append(piece)
            word_index.append(w)
    return AlignedSentence(sentence, tuple(pieces), tuple(word_index), tuple(first_piece_index))


def project_labels_to_pieces(
    aligned: AlignedSentence, tags: Sequence[BioTag]
) -> list[tuple[str, Optional[BioTag]]]:
    """Push word tags down to pieces; continuation pieces get None.

    The None marker is the IGNORE label: excluded from loss and from
    scoring, mirroring first-piece label selection on the way back up.
    """
    if len(tags) != len(aligned.sentence):
        raise ValueError(f"{len(tags)} tags for {len(aligned.sentence)} words")
    out = []
    for piece, w in zip(aligned.pieces, aligned.word_index):
        is_first = aligned.first_piece_index[w] == len(out)
        out.append((piece, tags[w] if is_first else None))
    return out


def project_piece_labels_to_words(
    aligned: AlignedSentence, piece_labels: Sequence[BioTag]
) -> list[BioTag]:
    """Read each word's label off its first piece, discarding the rest."""
    if len(piece_labels) != aligned.piece_count:
        raise ValueError(
            f"{len(piece_labels)} piece labels for {aligned.piece_count} pieces"
        )
    return [piece_labels[i] for i in aligned.first_piece_index]


@dataclass(frozen=True)
class ChunkPlan:
    """Word ranges (half-open) covering a sentence under a piece budget.

    The budget counts the two sequence delimiters, so a chunk holds at
    most budget - 2 pieces.
    """

    budget: int
    chunks: tuple[tuple[int, int], ...]


def chunk_sentence(aligned: AlignedSentence, budget: int = 512) -> ChunkPlan:
    """Greedy fill: extend the chunk word by word while pieces + 2 fit.

    Greedy left-to-right filling minimizes the chunk count among all
    splits at word boundaries. A single word wider than the budget
    cannot be split and raises.
    """
    capacity = budget - 2
    if capacity < 1:
        raise ValueError(f"budget {budget} leaves no room for content pieces")
    n_words = len(aligned.sentence)
    piece_counts = [len(aligned.pieces_of_word(w)) for w in range(n_words)]

    chunks = []
    start = 0
    used = 0
    for w, count in enumerate(piece_counts):
        if count > capacity:
            raise ChunkError(
                f"word {w} ({aligned.sentence.tokens[w].text!r}) spans {count} pieces, "
                f"over the {capacity}-piece budget; a word cannot be split"
            )
        if used + count > capacity:
            chunks.append((start, w))
            start, used = w, 0
        used += count
    chunks.append((start, n_words))
    return ChunkPlan(budget, tuple(chunks))


@dataclass(frozen=True)
class WordFragmentation:
    """How one word type tokenizes: its pieces and corpus frequency."""

    word: str
    occurrences: int
    pieces: tuple[str, ...]
    is_unknown: bool

    @property
    def piece_count(self) -> int:
        return len(self.pieces)

    @property
    def stripped_pieces(self) -> tuple[str, ...]:
        return tuple(
            p[len(CONTINUATION_PREFIX):] if p.startswith(CONTINUATION_PREFIX) else p
            for p in self.pieces
        )


@dataclass(frozen=True)
class FragmentationReport:
    """Corpus-level view of how aggressively words fragment."""

    rows: tuple[WordFragmentation, ...]
    total_tokens: int
    mean_pieces_per_word: float
    fragmented_fraction: float

    def top_fragmented(self, k: int = 20) -> list[WordFragmentation]:
        ranked = sorted(
            self.rows, key=lambda r: (-r.piece_count, -r.occurrences, r.word)
        )
        return ranked[:k]

    def to_tsv(self, sink: TextIO, top_k: Optional[int] = None) -> None:
        sink.write(f"# tokens\t{self.total_tokens}\n")
        sink.write(f"# word_types\t{len(self.rows)}\n")
        sink.write(f"# mean_pieces_per_word\t{self.mean_pieces_per_word:.4f}\n")
        sink.write(f"# fragmented_fraction\t{self.fragmented_fraction:.4f}\n")
        sink.write("word\toccurrences\tpiece_count\tunknown\tpieces\n")
        rows = self.top_fragmented(top_k) if top_k is not None else self.rows
        for row in rows:
            sink.write(
                f"{row.word}\t{row.occurrences}\t{row.piece_count}\t"
                f"{int(row.is_unknown)}\t{' '.join(row.pieces)}\n"
            )


def fragmentation_report(corpus: Corpus, vocab: Vocabulary) -> FragmentationReport:
    """Tokenize every word type and aggregate fragmentation statistics.

    Aggregates weight each token occurrence; a word is fragmented when
    it splits into two or more pieces.
    """
    counts: Counter[str] = Counter()
    for doc in corpus.documents:
        for sentence in doc.sentences:
            counts.update(t.text for t in sentence.tokens)

    rows = []
    total_tokens = 0
    piece_total = 0
    fragmented_tokens = 0
    for word in sorted(counts):
        occurrences = counts[word]
        pieces = tuple(wordpiece_tokenize(word, vocab))
        is_unknown = pieces == (vocab.unknown_token,)
        rows.append(WordFragmentation(word, occurrences, pieces, is_unknown))
        total_tokens += occurrences
        piece_total += len(pieces) * occurrences
        if len(pieces) >= 2:
            fragmented_tokens += occurrences

    mean = piece_total / total_tokens if total_tokens else 0.0
    fraction = fragmented_tokens / total_tokens if total_tokens else 0.0
    return FragmentationReport(tuple(rows), total_tokens, mean, fraction)
