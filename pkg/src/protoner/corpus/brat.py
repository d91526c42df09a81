"""BRAT standoff reader: ``.txt`` text plus ``.ann`` entity annotations.

Only T lines (entity spans) are consumed; relations, events, and other
annotation kinds are skipped. Sentences are text lines, tokens are
whitespace runs, so parsing stays deterministic for the line-structured
protocol corpora this targets.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, TextIO, Union

from protoner.corpus.bio import bio_encode
from protoner.corpus.types import Document, Sentence, Token
from protoner.errors import BratError

_T_LINE_RE = re.compile(r"^(T\S*)\t(\S+) ([0-9;\s]+?)\t(.*)$")


@dataclass(frozen=True)
class _RawAnnotation:
    ann_id: str
    entity_type: str
    start: int
    end: int
    surface: str
    fragmented: bool


def _parse_t_line(line: str, lineno: int) -> _RawAnnotation:
    m = _T_LINE_RE.match(line)
    if m is None:
        raise BratError(f"annotation line {lineno}: malformed T line: {line!r}")
    ann_id, entity_type, offsets, surface = m.groups()
    # Discontinuous spans ("start end;start end") are covered by their
    # overall extent; the caller records a warning for them.
    fragments = []
    for frag in offsets.split(";"):
        parts = frag.split()
        if len(parts) != 2:
            raise BratError(f"annotation line {lineno}: bad offsets {offsets!r}")
        try:
            fragments.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise BratError(f"annotation line {lineno}: bad offsets {offsets!r}") from exc
    start = min(f[0] for f in fragments)
    end = max(f[1] for f in fragments)
    if end <= start:
        raise BratError(f"annotation line {lineno}: empty range {start}..{end}")
    return _RawAnnotation(ann_id, entity_type, start, end, surface, len(fragments) > 1)


def _tokenize_lines(text: str) -> list[list[Token]]:
    """Split text into per-line token lists with global character offsets."""
    sentences = []
    offset = 0
    for line in text.split("\n"):
        tokens = []
        for m in re.finditer(r"\S+", line):
            tokens.append(Token(m.group(), offset + m.start(), offset + m.end()))
        sentences.append(tokens)
        offset += len(line) + 1
    return sentences


def parse_brat(
    text: str,
    annotations: Union[str, TextIO],
    doc_id: str = "doc",
    warnings_out: Optional[list[str]] = None,
) -> Document:
    """Build a tagged document from text and its standoff annotations.

    Annotations whose character range does not align with token
    boundaries are extended outward to the covering tokens, recording a
    warning in warnings_out (when given). Ranges past the end of the
    text raise; so do annotations crossing a line boundary, since spans
    are sentence-local. When two annotations claim overlapping token
    ranges the one starting first (longer on ties) wins and the loser is
    dropped with a warning, never silently.
    """
    if hasattr(annotations, "read"):
        annotations = annotations.read()
    warnings = warnings_out if warnings_out is not None else []

    token_lines = _tokenize_lines(text)
    raw: list[_RawAnnotation] = []
    for lineno, line in enumerate(annotations.splitlines(), 1):
        if not line.strip():
            continue
        if not line.startswith("T"):
            continue  # relations, events, notes
        ann = _parse_t_line(line, lineno)
        if ann.end > len(text):
            raise BratError(
                f"annotation {ann.ann_id}: range {ann.start}..{ann.end} exceeds "
                f"text length {len(text)}"
            )
        if ann.fragmented:
            warnings.append(
                f"{ann.ann_id}: discontinuous annotation covered by overall "
                f"extent {ann.start}..{ann.end}"
            )
        raw.append(ann)

    # Align each annotation to the tokens overlapping its range.
    aligned: list[tuple[int, int, int, _RawAnnotation]] = []  # (sent, start_w, end_w, ann)
    for ann in raw:
        hits = [
            (s_idx, w_idx, tok)
            for s_idx, tokens in enumerate(token_lines)
            for w_idx, tok in enumerate(tokens)
            if tok.char_start < ann.end and tok.char_end > ann.start
        ]
        if not hits:
            raise BratError(
                f"annotation {ann.ann_id}: range {ann.start}..{ann.end} covers "
                "no token (whitespace only)"
            )
        sent_indices = {h[0] for h in hits}
        if len(sent_indices) > 1:
            raise BratError(
                f"annotation {ann.ann_id}: range {ann.start}..{ann.end} crosses "
                "a line boundary"
            )
        s_idx = hits[0][0]
        first_tok, last_tok = hits[0][2], hits[-1][2]
        if first_tok.char_start != ann.start or last_tok.char_end != ann.end:
            warnings.append(
                f"{ann.ann_id}: range {ann.start}..{ann.end} not aligned to token "
                f"boundaries, extended to {first_tok.char_start}..{last_tok.char_end}"
            )
        aligned.append((s_idx, hits[0][1], hits[-1][1], ann))

    # Resolve overlapping claims per sentence: earlier start wins, then longer.
    per_sentence: dict[int, list[tuple[int, int, str]]] = {}
    aligned.sort(key=lambda item: (item[0], item[1], -(item[2] - item[1])))
    for s_idx, start_w, end_w, ann in aligned:
        kept = per_sentence.setdefault(s_idx, [])
        clash = next((k for k in kept if k[0] <= end_w and start_w <= k[1]), None)
        if clash is not None:
            warnings.append(
                f"{ann.ann_id}: word span {start_w}..{end_w} overlaps an already "
                f"kept annotation at {clash[0]}..{clash[1]}, dropped"
            )
            continue
        kept.append((start_w, end_w, ann.entity_type))

    from protoner.corpus.types import EntitySpan

    sentences = []
    for s_idx, tokens in enumerate(token_lines):
        if not tokens:
            continue  # blank line, no sentence
        spans = [EntitySpan(s, e, t) for s, e, t in sorted(per_sentence.get(s_idx, []))]
        tags = bio_encode(spans, len(tokens))
        sentences.append(Sentence(tuple(tokens), tuple(tags)))
    return Document(doc_id, tuple(sentences), source_text=text)
