"""BIO codec: span <-> tag conversion, schema validation, and repair.

The scheme: the first word of an entity of type X is tagged B-X, its
continuation words I-X, and non-entity words O. Two adjacent same-type
entities therefore read ... I-X, B-X ... at their boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from protoner.corpus.types import BioTag, EntitySpan, O
from protoner.errors import SpanError, TagSchemaError


@dataclass(frozen=True)
class BioViolation:
    """One position where a tag sequence breaks the scheme."""

    position: int
    message: str


def bio_encode(spans: Sequence[EntitySpan], n: int) -> list[BioTag]:
    """Encode non-overlapping spans over a sentence of length n as tags."""
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if prev.overlaps(cur):
            raise SpanError(
                f"overlapping spans ({prev.start},{prev.end},{prev.entity_type}) "
                f"and ({cur.start},{cur.end},{cur.entity_type})"
            )
    tags: list[BioTag] = [O] * n
    for span in ordered:
        if span.end >= n:
            raise SpanError(
                f"span ({span.start},{span.end}) out of range for length {n}"
            )
        tags[span.start] = BioTag("B", span.entity_type)
        for i in range(span.start + 1, span.end + 1):
            tags[i] = BioTag("I", span.entity_type)
    return tags


def bio_decode(tags: Sequence[BioTag]) -> list[EntitySpan]:
    """Extract spans from a schema-valid tag sequence, sorted by start.

    Raises on the first violating position; run validate_bio or
    repair_bio on raw predictions first.
    """
    violations = validate_bio(tags)
    if violations:
        v = violations[0]
        raise TagSchemaError(f"invalid tag sequence at position {v.position}: {v.message}")
    spans: list[EntitySpan] = []
    start = None
    current_type = None
    for i, tag in enumerate(tags):
        if tag.scheme == "B":
            if start is not None:
                spans.append(EntitySpan(start, i - 1, current_type))
            start, current_type = i, tag.entity_type
        elif tag.scheme == "O":
            if start is not None:
                spans.append(EntitySpan(start, i - 1, current_type))
            start, current_type = None, None
        # I continues the open span; validity was established above
    if start is not None:
        spans.append(EntitySpan(start, len(tags) - 1, current_type))
    return spans


def validate_bio(tags: Sequence[BioTag]) -> list[BioViolation]:
    """Return every position where an I tag lacks a matching predecessor."""
    violations = []
    for i, tag in enumerate(tags):
        if tag.scheme != "I":
            continue
        if i == 0:
            violations.append(BioViolation(0, f"{tag} at sentence start"))
        else:
            prev = tags[i - 1]
            if not prev.is_entity or prev.entity_type != tag.entity_type:
                violations.append(BioViolation(i, f"{tag} after {prev}"))
    return violations


def repair_bio(tags: Sequence[BioTag], mode: str = "begin") -> list[BioTag]:
    """Rewrite a tag sequence so it is schema-valid.

    mode="begin": a violating I-X becomes B-X (opens a fresh entity).
    mode="merge": a violating I-X after a running entity adopts its type
    (becomes I-T for predecessor type T); after O or at sentence start it
    becomes B-X. Repairs run left to right against the repaired prefix.
    """
    if mode not in ("begin", "merge"):
        raise ValueError(f"unknown repair mode {mode!r}")
    out: list[BioTag] = []
    for i, tag in enumerate(tags):
        if tag.scheme != "I":
            out.append(tag)
            continue
        prev = out[i - 1] if i > 0 else None
        if prev is not None and prev.is_entity and prev.entity_type == tag.entity_type:
            out.append(tag)
        elif mode == "begin" or prev is None or not prev.is_entity:
            out.append(BioTag("B", tag.entity_type))
        else:
            out.append(BioTag("I", prev.entity_type))
    return out
