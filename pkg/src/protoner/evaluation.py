"""Entity-level scoring, error categorization, and annotator agreement.

Two matching regimes: exact (identical boundaries and type) and
partial (same type, at least one overlapping word). Matching is
one-to-one and greedy: predictions in left-to-right order, each taking
the leftmost eligible unmatched gold span. 0/0 precision or recall is
defined as 0 so degenerate corpora score deterministically.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from protoner.corpus.bio import bio_decode
from protoner.corpus.types import Corpus, EntitySpan, Sentence
from protoner.errors import AlignmentError


class MatchMode(enum.Enum):
    EXACT = "exact"
    PARTIAL = "partial"


@dataclass(frozen=True)
class TypeScores:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class EvalReport:
    mode: MatchMode
    per_type: dict
    micro: TypeScores


@dataclass(frozen=True)
class ErrorRecord:
    """One categorized disagreement between gold and predicted spans."""

    category: str  # type-error | boundary-error | fragmentation | spurious | missed
    doc_id: str
    sentence_index: int
    gold_spans: tuple[EntitySpan, ...]
    pred_spans: tuple[EntitySpan, ...]
    detail: str = ""


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    observed: float
    expected: float
    unit_count: int


def _check_alignment(gold: Corpus, pred: Corpus) -> None:
    """Token-level alignment; raises naming the first divergent sentence."""
    gold_ids = [d.id for d in gold.documents]
    pred_ids = [d.id for d in pred.documents]
    if gold_ids != pred_ids:
        raise AlignmentError(
            f"document ids differ: {gold_ids} vs {pred_ids}"
        )
    for gold_doc, pred_doc in zip(gold.documents, pred.documents):
        if len(gold_doc.sentences) != len(pred_doc.sentences):
            raise AlignmentError(
                f"document {gold_doc.id!r}: {len(gold_doc.sentences)} vs "
                f"{len(pred_doc.sentences)} sentences"
            )
        for s, (a, b) in enumerate(zip(gold_doc.sentences, pred_doc.sentences)):
            if len(a) != len(b):
                raise AlignmentError(
                    f"document {gold_doc.id!r} sentence {s}: "
                    f"token counts differ ({len(a)} vs {len(b)})"
                )


def _eligible(pred: EntitySpan, gold: EntitySpan, mode: MatchMode) -> bool:
    if pred.entity_type != gold.entity_type:
        return False
    if mode is MatchMode.EXACT:
        return (pred.start, pred.end) == (gold.start, gold.end)
    return pred.overlaps(gold)


def match_spans(
    gold_spans: Sequence[EntitySpan],
    pred_spans: Sequence[EntitySpan],
    mode: MatchMode,
) -> tuple[list, list, list]:
    """One-to-one greedy matching within one sentence.

    Returns (matched pairs, unmatched gold, unmatched pred); pairs hold
    (gold, pred). Both inputs must be in left-to-right order.
    """
    taken = [False] * len(gold_spans)
    pairs = []
    unmatched_pred = []
    for pred in pred_spans:
        for g, gold in enumerate(gold_spans):
            if not taken[g] and _eligible(pred, gold, mode):
                taken[g] = True
                pairs.append((gold, pred))
                break
        else:
            unmatched_pred.append(pred)
    unmatched_gold = [g for g, used in zip(gold_spans, taken) if not used]
    return pairs, unmatched_gold, unmatched_pred


def _sentence_spans(sentence: Sentence) -> list:
    if sentence.tags is None:
        raise AlignmentError("cannot evaluate an untagged sentence")
    return bio_decode(sentence.tags)


def evaluate(gold: Corpus, pred: Corpus, mode: MatchMode) -> EvalReport:
    """Span-level precision/recall/F1, per type and micro-averaged."""
    _check_alignment(gold, pred)
    counts: dict[str, list[int]] = {}  # type -> [tp, fp, fn]
    for entity_type in set(gold.label_set.types) | set(pred.label_set.types):
        counts[entity_type] = [0, 0, 0]

    for gold_sentence, pred_sentence in zip(gold.sentences, pred.sentences):
        pairs, unmatched_gold, unmatched_pred = match_spans(
            _sentence_spans(gold_sentence), _sentence_spans(pred_sentence), mode
        )
        for gold_span, _ in pairs:
            counts.setdefault(gold_span.entity_type, [0, 0, 0])[0] += 1
        for span in unmatched_pred:
            counts.setdefault(span.entity_type, [0, 0, 0])[1] += 1
        for span in unmatched_gold:
            counts.setdefault(span.entity_type, [0, 0, 0])[2] += 1

    per_type = {
        name: TypeScores(tp, fp, fn)
        for name, (tp, fp, fn) in sorted(counts.items())
    }
    micro = TypeScores(
        sum(s.tp for s in per_type.values()),
        sum(s.fp for s in per_type.values()),
        sum(s.fn for s in per_type.values()),
    )
    return EvalReport(mode, per_type, micro)


def error_report(gold: Corpus, pred: Corpus) -> list[ErrorRecord]:
    """Classify every exact-match FP/FN into exactly one category.

    Precedence: type-error (identical extent, different type), then
    boundary-error (one-to-one same-type overlap with different extent),
    then fragmentation (gold overlapped by two or more same-type
    predictions), then spurious (leftover predictions) and missed
    (leftover gold). Spurious/missed records note any remaining
    cross-type overlap in their detail field.
    """
    _check_alignment(gold, pred)
    records = []
    sentence_index = {}
    for doc in gold.documents:
        for s in range(len(doc.sentences)):
            sentence_index[len(sentence_index)] = (doc.id, s)

    for key, (gold_sentence, pred_sentence) in enumerate(
        zip(gold.sentences, pred.sentences)
    ):
        doc_id, s = sentence_index[key]
        gold_spans = _sentence_spans(gold_sentence)
        pred_spans = _sentence_spans(pred_sentence)
        _, gold_left, pred_left = match_spans(gold_spans, pred_spans, MatchMode.EXACT)
        records.extend(
            _classify_sentence(doc_id, s, gold_left, pred_left, gold_spans, pred_spans)
        )
    return records


def _classify_sentence(
    doc_id: str,
    sentence: int,
    gold_left: list,
    pred_left: list,
    all_gold: list,
    all_pred: list,
) -> list[ErrorRecord]:
    records = []
    gold_left = list(gold_left)
    pred_left = list(pred_left)

    # type-error: identical extent, different type (unique pairing,
    # spans on each side are disjoint)
    for gold in list(gold_left):
        for pred in pred_left:
            if (pred.start, pred.end) == (gold.start, gold.end):
                records.append(
                    ErrorRecord("type-error", doc_id, sentence, (gold,), (pred,))
                )
                gold_left.remove(gold)
                pred_left.remove(pred)
                break

    # boundary-error: strictly one-to-one same-type overlap
    for gold in list(gold_left):
        overlapping = [
            p
            for p in pred_left
            if p.entity_type == gold.entity_type and p.overlaps(gold)
        ]
        if len(overlapping) != 1:
            continue
        pred = overlapping[0]
        golds_of_pred = [
            g
            for g in gold_left
            if g.entity_type == pred.entity_type and pred.overlaps(g)
        ]
        if golds_of_pred == [gold]:
            records.append(
                ErrorRecord("boundary-error", doc_id, sentence, (gold,), (pred,))
            )
            gold_left.remove(gold)
            pred_left.remove(pred)

    # fragmentation: gold split across >= 2 same-type predictions
    for gold in list(gold_left):
        fragments = [
            p
            for p in pred_left
            if p.entity_type == gold.entity_type and p.overlaps(gold)
        ]
        if len(fragments) >= 2:
            records.append(
                ErrorRecord(
                    "fragmentation", doc_id, sentence, (gold,), tuple(fragments)
                )
            )
            gold_left.remove(gold)
            for p in fragments:
                pred_left.remove(p)

    # details reference the sentence's full span lists so a typed overlap
    # is reported even when its counterpart landed in another category
    for pred in pred_left:
        overlap_types = sorted(
            {g.entity_type for g in all_gold if pred.overlaps(g)}
        )
        detail = f"overlaps gold of type {', '.join(overlap_types)}" if overlap_types else ""
        records.append(
            ErrorRecord("spurious", doc_id, sentence, (), (pred,), detail)
        )
    for gold in gold_left:
        overlap_types = sorted(
            {p.entity_type for p in all_pred if p.overlaps(gold)}
        )
        detail = f"overlapped by prediction of type {', '.join(overlap_types)}" if overlap_types else ""
        records.append(
            ErrorRecord("missed", doc_id, sentence, (gold,), (), detail)
        )
    return records


def _merge_units(spans: Iterable[EntitySpan]) -> list[tuple[int, int]]:
    """Maximal word ranges formed by transitively overlapping spans."""
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    units: list[list[int]] = []
    for span in ordered:
        if units and span.start <= units[-1][1]:
            units[-1][1] = max(units[-1][1], span.end)
        else:
            units.append([span.start, span.end])
    return [(a, b) for a, b in units]


_NONE_CATEGORY = "NONE"


def _unit_category(unit: tuple[int, int], spans: Sequence[EntitySpan]) -> str:
    """The annotator's label for a unit: type of their earliest span
    intersecting it, NONE if they proposed nothing there."""
    start, end = unit
    for span in spans:  # spans are sorted and disjoint
        if span.start <= end and start <= span.end:
            return span.entity_type
    return _NONE_CATEGORY


def cohen_kappa(annotator_a: Corpus, annotator_b: Corpus) -> AgreementReport:
    """Span-level chance-corrected agreement.

    Units are maximal merged extents of spans proposed by either
    annotator; each annotator labels a unit with their covering span's
    type or NONE. Degenerate cases: zero units or expected agreement 1
    (both constant, necessarily equal) yield kappa 1 by convention.
    """
    _check_alignment(annotator_a, annotator_b)
    labels_a: list[str] = []
    labels_b: list[str] = []
    for sentence_a, sentence_b in zip(annotator_a.sentences, annotator_b.sentences):
        spans_a = _sentence_spans(sentence_a)
        spans_b = _sentence_spans(sentence_b)
        for unit in _merge_units(spans_a + spans_b):
            labels_a.append(_unit_category(unit, spans_a))
            labels_b.append(_unit_category(unit, spans_b))

    n = len(labels_a)
    if n == 0:
        return AgreementReport(1.0, 1.0, 0.0, 0)
    observed = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    categories = set(labels_a) | set(labels_b)
    expected = sum(
        (labels_a.count(c) / n) * (labels_b.count(c) / n) for c in categories
    )
    if expected == 1.0:
        return AgreementReport(1.0, observed, expected, n)
    kappa = (observed - expected) / (1 - expected)
    return AgreementReport(kappa, observed, expected, n)


def format_reports_table(reports: Sequence[EvalReport]) -> str:
    """Human-readable table, one block per mode, types then micro."""
    lines = []
    for report in reports:
        lines.append(f"[{report.mode.value} match]")
        lines.append(
            f"{'type':<20}{'TP':>6}{'FP':>6}{'FN':>6}{'P':>9}{'R':>9}{'F1':>9}"
        )
        rows = list(report.per_type.items()) + [("micro", report.micro)]
        for name, scores in rows:
            lines.append(
                f"{name:<20}{scores.tp:>6}{scores.fp:>6}{scores.fn:>6}"
                f"{scores.precision:>9.4f}{scores.recall:>9.4f}{scores.f1:>9.4f}"
            )
        lines.append("")
    return "\n".join(lines)


def format_reports_kv(reports: Sequence[EvalReport]) -> str:
    """Machine-readable lines: mode.scope.metric<TAB>value."""
    lines = []
    for report in reports:
        mode = report.mode.value
        rows = list(report.per_type.items()) + [("micro", report.micro)]
        for name, scores in rows:
            for metric in ("tp", "fp", "fn"):
                lines.append(f"{mode}.{name}.{metric}\t{getattr(scores, metric)}")
            for metric in ("precision", "recall", "f1"):
                lines.append(f"{mode}.{name}.{metric}\t{getattr(scores, metric):.6f}")
    return "\n".join(lines)
