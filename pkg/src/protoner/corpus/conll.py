"""CoNLL-style two-column reader and writer.

Line grammar: ``token<sep>tag``, blank line between sentences, and a
``#doc <id>`` line (or a ``-DOCSTART-`` row) opening a new document.
Beware that a token literally spelled ``#doc`` cannot round-trip; it
would read back as a document marker.
"""
from __future__ import annotations

import io
import re
from typing import Optional, TextIO, Union

from protoner.corpus.bio import validate_bio
from protoner.corpus.types import BioTag, Corpus, Document, LabelSet, Sentence, Token
from protoner.errors import ConllError

_TAG_RE = re.compile(r"^(O|[BI]-.+)$")


def _as_text(source: Union[str, TextIO]) -> str:
    if hasattr(source, "read"):
        return source.read()
    return source


def parse_conll(
    source: Union[str, TextIO],
    column_sep: str = "whitespace",
    label_set: Optional[LabelSet] = None,
) -> Corpus:
    """Parse two-column CoNLL text into a corpus.

    column_sep is "whitespace" (any run of blanks) or "tab". The label
    set is derived from the observed entity types in first-occurrence
    order unless one is supplied. Sentences whose tag sequence violates
    the BIO scheme are kept but flagged unvalidated so raw predictions
    remain loadable; repair them before span extraction.
    """
    if column_sep not in ("whitespace", "tab"):
        raise ValueError(f"unknown column separator {column_sep!r}")

    documents: list[Document] = []
    auto_ids = 0

    cur_doc_id: Optional[str] = None
    cur_doc_started = False
    cur_sentences: list[Sentence] = []
    cur_tokens: list[Token] = []
    cur_tags: list[BioTag] = []
    observed_types: list[str] = []

    def flush_sentence():
        nonlocal cur_tokens, cur_tags
        if not cur_tokens:
            return
        tags = tuple(cur_tags)
        unvalidated = bool(validate_bio(tags))
        cur_sentences.append(Sentence(tuple(cur_tokens), tags, unvalidated))
        cur_tokens, cur_tags = [], []

    def flush_document():
        nonlocal cur_sentences, cur_doc_id, cur_doc_started, auto_ids
        flush_sentence()
        if not cur_doc_started and not cur_sentences:
            return
        if cur_doc_id is None:
            cur_doc_id = f"doc{auto_ids}"
        auto_ids += 1
        documents.append(Document(cur_doc_id, tuple(cur_sentences)))
        cur_sentences, cur_doc_id, cur_doc_started = [], None, False

    for lineno, raw in enumerate(_as_text(source).splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush_sentence()
            continue
        if line == "#doc" or line.startswith("#doc "):
            flush_document()
            doc_id = line[4:].strip()
            cur_doc_id = doc_id if doc_id else None
            cur_doc_started = True
            continue
        if column_sep == "tab":
            columns = line.split("\t")
        else:
            columns = line.split()
        if columns and columns[0] == "-DOCSTART-":
            flush_document()
            cur_doc_started = True
            continue
        if len(columns) != 2:
            raise ConllError(
                f"line {lineno}: expected 2 columns, got {len(columns)}: {line!r}"
            )
        token_text, tag_text = columns
        if not _TAG_RE.match(tag_text):
            raise ConllError(f"line {lineno}: not a valid BIO tag: {tag_text!r}")
        tag = BioTag.parse(tag_text)
        if label_set is not None and tag not in label_set:
            raise ConllError(
                f"line {lineno}: tag {tag_text!r} outside the declared label set"
            )
        if tag.is_entity and tag.entity_type not in observed_types:
            observed_types.append(tag.entity_type)
        try:
            cur_tokens.append(Token(token_text))
        except ValueError as exc:
            raise ConllError(f"line {lineno}: {exc}") from exc
        cur_tags.append(tag)

    flush_document()

    if label_set is None:
        label_set = LabelSet(tuple(observed_types) if observed_types else ("Entity",))
    return Corpus(tuple(documents), label_set)


def write_conll(corpus: Corpus, sink: Optional[TextIO] = None) -> str:
    """Serialize a fully tagged corpus; inverse of parse_conll.

    Every document is preceded by its ``#doc <id>`` marker; token and
    tag are separated by a single tab.
    """
    out = sink if sink is not None else io.StringIO()
    for doc in corpus.documents:
        out.write(f"#doc {doc.id}\n")
        for s_idx, sent in enumerate(doc.sentences):
            if sent.tags is None:
                raise ConllError(
                    f"document {doc.id!r} sentence {s_idx} has no tags"
                )
            for token, tag in zip(sent.tokens, sent.tags):
                out.write(f"{token.text}\t{tag}\n")
            out.write("\n")
    if sink is not None:
        return ""
    return out.getvalue()
