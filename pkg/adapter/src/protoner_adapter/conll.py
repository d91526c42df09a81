"""Minimal CoNLL reader/writer.

Deliberately independent of the consumer package: the adapter talks to
it only through files, so any drift in the format shows up as a test
failure against the real consumer instead of being defined away by
shared code.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from protoner_adapter.errors import AdapterDataError


@dataclass(frozen=True)
class Sentence:
    words: tuple[str, ...]
    tags: tuple[str, ...]


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]


def parse_conll(text: str) -> list[Document]:
    """word<TAB>tag lines (spaces also accepted), blank line between
    sentences, '#doc <id>' opening each document."""
    documents: list[Document] = []
    doc_id: str | None = None
    sentences: list[Sentence] = []
    words: list[str] = []
    tags: list[str] = []

    def close_sentence():
        if words:
            sentences.append(Sentence(tuple(words), tuple(tags)))
            words.clear()
            tags.clear()

    def close_document():
        close_sentence()
        if doc_id is not None:
            documents.append(Document(doc_id, tuple(sentences)))
        sentences.clear()

    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("#doc"):
            close_document()
            doc_id = line[4:].strip()
            if not doc_id:
                raise AdapterDataError(f"line {lineno}: #doc without an id")
            continue
        if not line.strip():
            close_sentence()
            continue
        if doc_id is None:
            raise AdapterDataError(f"line {lineno}: token before any #doc header")
        columns = line.split("\t") if "\t" in line else line.split()
        if len(columns) != 2 or not columns[0] or not columns[1]:
            raise AdapterDataError(f"line {lineno}: expected 'word<TAB>tag', got {line!r}")
        words.append(columns[0])
        tags.append(columns[1])
    close_document()
    if not documents:
        raise AdapterDataError("no documents in input")
    return documents


def write_conll(documents: Sequence[Document]) -> str:
    lines: list[str] = []
    for doc in documents:
        lines.append(f"#doc {doc.doc_id}")
        for i, sentence in enumerate(doc.sentences):
            if i:
                lines.append("")
            lines.extend(f"{w}\t{t}" for w, t in zip(sentence.words, sentence.tags))
    return "\n".join(lines) + "\n"


def entity_types(documents: Sequence[Document]) -> tuple[str, ...]:
    """Entity types in first-seen order (the tag alphabet order)."""
    seen: dict[str, None] = {}
    for doc in documents:
        for sentence in doc.sentences:
            for tag in sentence.tags:
                if tag != "O":
                    seen[tag[2:]] = None
    return tuple(seen)
