"""Core data model: tokens, sentences, documents, labels, and spans.

All types are immutable after construction; collections are stored as
tuples so instances can be shared freely across threads.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from protoner.errors import SpanError, TagSchemaError

_TAG_RE = re.compile(r"^(O|[BI]-.+)$")


@dataclass(frozen=True)
class BioTag:
    """One tag of the BIO scheme: O, B-<type>, or I-<type>."""

    scheme: str  # "O", "B" or "I"
    entity_type: Optional[str] = None

    def __post_init__(self):
        if self.scheme == "O":
            if self.entity_type is not None:
                raise TagSchemaError("O tag must not carry an entity type")
        elif self.scheme in ("B", "I"):
            if not self.entity_type:
                raise TagSchemaError(f"{self.scheme} tag requires an entity type")
        else:
            raise TagSchemaError(f"unknown tag scheme {self.scheme!r}")

    @classmethod
    def parse(cls, text: str) -> "BioTag":
        """Parse a tag string; the type is everything after the first '-'."""
        if not _TAG_RE.match(text):
            raise TagSchemaError(f"not a valid BIO tag: {text!r}")
        if text == "O":
            return cls("O")
        scheme, entity_type = text.split("-", 1)
        return cls(scheme, entity_type)

    @property
    def is_entity(self) -> bool:
        return self.scheme != "O"

    def __str__(self) -> str:
        if self.scheme == "O":
            return "O"
        return f"{self.scheme}-{self.entity_type}"


O = BioTag("O")


@dataclass(frozen=True)
class LabelSet:
    """Ordered inventory of entity types and the derived tag alphabet.

    The alphabet is deterministic: O first, then the B-/I- pair of each
    type in declaration order, giving 2 * len(types) + 1 tags.
    """

    types: tuple[str, ...]

    def __post_init__(self):
        if not self.types:
            raise ValueError("label set needs at least one entity type")
        seen = set()
        for t in self.types:
            if not t:
                raise ValueError("entity type names must be non-empty")
            if t == "O":
                raise ValueError("'O' is reserved and cannot be an entity type")
            if t in seen:
                raise ValueError(f"duplicate entity type {t!r}")
            seen.add(t)

    @classmethod
    def from_types(cls, types: Iterable[str]) -> "LabelSet":
        return cls(tuple(types))

    @property
    def tags(self) -> tuple[BioTag, ...]:
        out = [O]
        for t in self.types:
            out.append(BioTag("B", t))
            out.append(BioTag("I", t))
        return tuple(out)

    @property
    def tag_strings(self) -> tuple[str, ...]:
        return tuple(str(t) for t in self.tags)

    def tag_index(self, tag: BioTag) -> int:
        if tag.scheme == "O":
            return 0
        base = 1 + 2 * self.types.index(tag.entity_type)
        return base if tag.scheme == "B" else base + 1

    def __contains__(self, tag: BioTag) -> bool:
        return tag.scheme == "O" or tag.entity_type in self.types

    def __len__(self) -> int:
        return 2 * len(self.types) + 1


@dataclass(frozen=True)
class Token:
    """A single word with optional half-open character offsets."""

    text: str
    char_start: Optional[int] = None
    char_end: Optional[int] = None

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise ValueError(f"token text must be non-empty without whitespace: {self.text!r}")
        if (self.char_start is None) != (self.char_end is None):
            raise ValueError("char_start and char_end must be both present or both absent")
        if self.char_start is not None:
            if self.char_end <= self.char_start:
                raise ValueError("char_end must be greater than char_start")
            if self.char_end - self.char_start != len(self.text):
                raise ValueError(
                    f"offset width {self.char_end - self.char_start} does not match "
                    f"token length {len(self.text)} for {self.text!r}"
                )

    @property
    def has_offsets(self) -> bool:
        return self.char_start is not None


@dataclass(frozen=True)
class Sentence:
    """An ordered token sequence, optionally tagged.

    Tagged sentences are validated against the BIO scheme unless
    ``unvalidated`` is set; raw model output that may violate the scheme
    (e.g. I-X after O) must be constructed with ``unvalidated=True`` and
    repaired before span extraction.
    """

    tokens: tuple[Token, ...]
    tags: Optional[tuple[BioTag, ...]] = None
    unvalidated: bool = False

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")
        prev_end = None
        for tok in self.tokens:
            if tok.has_offsets:
                if prev_end is not None and tok.char_start < prev_end:
                    raise ValueError(
                        f"token offsets overlap or decrease at {tok.text!r}"
                    )
                prev_end = tok.char_end
        if self.tags is not None:
            if len(self.tags) != len(self.tokens):
                raise ValueError(
                    f"{len(self.tags)} tags for {len(self.tokens)} tokens"
                )
            if not self.unvalidated:
                from protoner.corpus.bio import validate_bio

                violations = validate_bio(self.tags)
                if violations:
                    v = violations[0]
                    raise TagSchemaError(
                        f"invalid tag sequence at position {v.position}: {v.message} "
                        "(pass unvalidated=True to defer validation)"
                    )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)

    @property
    def tag_strings(self) -> Optional[tuple[str, ...]]:
        return None if self.tags is None else tuple(str(t) for t in self.tags)

    def with_tags(self, tags: Sequence[BioTag], unvalidated: bool = False) -> "Sentence":
        return Sentence(self.tokens, tuple(tags), unvalidated)


@dataclass(frozen=True)
class EntitySpan:
    """Inclusive word-index span carrying one entity type."""

    start: int
    end: int
    entity_type: str

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise SpanError(f"bad span boundaries ({self.start}, {self.end})")
        if not self.entity_type:
            raise SpanError("span needs an entity type")

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class Document:
    """One protocol: an id plus its sentences, with optional source text."""

    id: str
    sentences: tuple[Sentence, ...]
    source_text: Optional[str] = None

    def __post_init__(self):
        if self.source_text is not None:
            for s_idx, sent in enumerate(self.sentences):
                for tok in sent.tokens:
                    if not tok.has_offsets:
                        continue
                    if tok.char_end > len(self.source_text):
                        raise ValueError(
                            f"token offsets exceed source text in sentence {s_idx}"
                        )
                    surface = self.source_text[tok.char_start:tok.char_end]
                    if surface != tok.text:
                        raise ValueError(
                            f"token {tok.text!r} does not match source text "
                            f"slice {surface!r} in sentence {s_idx}"
                        )

    @property
    def is_tagged(self) -> bool:
        return all(s.tags is not None for s in self.sentences)


@dataclass(frozen=True)
class Corpus:
    """A document collection plus the label set its tags live in."""

    documents: tuple[Document, ...]
    label_set: LabelSet

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValueError(f"duplicate document id {dup!r}")
        for doc in self.documents:
            for s_idx, sent in enumerate(doc.sentences):
                for tag in sent.tags or ():
                    if tag not in self.label_set:
                        raise ValueError(
                            f"tag {tag} in document {doc.id!r} sentence {s_idx} "
                            f"is outside the label set {self.label_set.types}"
                        )

    @classmethod
    def from_documents(
        cls, documents: Iterable[Document], label_set: Optional[LabelSet] = None
    ) -> "Corpus":
        """Build a corpus, deriving the label set from the data if not given.

        Derived types are ordered by first occurrence; a corpus with no
        entity tags at all gets a single placeholder type so the alphabet
        is never empty.
        """
        docs = tuple(documents)
        if label_set is None:
            types: list[str] = []
            for doc in docs:
                for sent in doc.sentences:
                    for tag in sent.tags or ():
                        if tag.is_entity and tag.entity_type not in types:
                            types.append(tag.entity_type)
            label_set = LabelSet(tuple(types) if types else ("Entity",))
        return cls(docs, label_set)

    @property
    def sentences(self) -> tuple[Sentence, ...]:
        return tuple(s for d in self.documents for s in d.sentences)

    @property
    def is_tagged(self) -> bool:
        return all(d.is_tagged for d in self.documents)

    def __len__(self) -> int:
        return len(self.documents)


def sentence_from_words(
    words: Sequence[str], tags: Optional[Sequence[str | BioTag]] = None,
    unvalidated: bool = False,
) -> Sentence:
    """Convenience constructor from plain strings (no offsets)."""
    parsed = None
    if tags is not None:
        parsed = tuple(t if isinstance(t, BioTag) else BioTag.parse(t) for t in tags)
    return Sentence(tuple(Token(w) for w in words), parsed, unvalidated)
