"""Ingest per-subword scores from any external encoder and decode them.

Wire format (UTF-8, line oriented): a header block

    #version 1
    #alphabet O<TAB>B-X<TAB>I-X ...
    #vocab sha256:abcdef0123456789
    #budget 512

followed by one record per subword piece:

    doc<TAB>sentence<TAB>piece<TAB>surface<TAB>word_index<TAB>v1 v2 ... vm

Scores are raw logits; decoding takes each word's first-piece vector
and either argmaxes (with begin-mode repair) or runs constrained
Viterbi with -inf on schema-invalid transitions. Piece indices are
global per sentence, so a sentence exported in several chunks re-joins
by simple concatenation; this module, not the exporter, owns that.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

from protoner.corpus.bio import repair_bio
from protoner.corpus.types import BioTag, Corpus, Document, LabelSet, Sentence
from protoner.crf import chain
from protoner.crf.model import bio_constraint_masks
from protoner.errors import BridgeError
from protoner.subword import AlignedSentence, Vocabulary, tokenize_sentence

BRIDGE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BridgeHeader:
    version: int
    alphabet: tuple[str, ...]
    vocab_id: str
    budget: int


@dataclass(frozen=True)
class LogitsRecord:
    doc_id: str
    sentence_index: int
    piece_index: int
    surface: str
    word_index: int
    scores: tuple[float, ...]


@dataclass(frozen=True)
class BridgeData:
    header: BridgeHeader
    groups: dict  # (doc_id, sentence_index) -> tuple[LogitsRecord, ...]


def _parse_header(lines: list[tuple[int, str]]) -> BridgeHeader:
    fields = {}
    for lineno, line in lines:
        key, _, value = line[1:].partition(" ")
        if key in fields:
            raise BridgeError(f"line {lineno}: duplicate header field #{key}")
        fields[key] = (lineno, value)

    missing = {"version", "alphabet", "vocab", "budget"} - fields.keys()
    if missing:
        raise BridgeError(f"header is missing fields: {sorted(missing)}")
    unknown = fields.keys() - {"version", "alphabet", "vocab", "budget"}
    if unknown:
        raise BridgeError(f"unknown header fields: {sorted(unknown)}")

    lineno, version = fields["version"]
    if version.strip() != str(BRIDGE_FORMAT_VERSION):
        raise BridgeError(
            f"line {lineno}: format version {version.strip()!r} unsupported "
            f"(this build reads {BRIDGE_FORMAT_VERSION})"
        )
    alphabet = tuple(fields["alphabet"][1].split("\t"))
    if len(alphabet) < 1 or any(not tag for tag in alphabet):
        raise BridgeError(f"line {fields['alphabet'][0]}: empty alphabet entry")
    if len(set(alphabet)) != len(alphabet):
        raise BridgeError(f"line {fields['alphabet'][0]}: duplicate alphabet entries")
    lineno, budget = fields["budget"]
    try:
        budget_value = int(budget)
    except ValueError:
        raise BridgeError(f"line {lineno}: budget must be an integer, got {budget!r}") from None
    vocab_id = fields["vocab"][1].strip()
    if not vocab_id:
        raise BridgeError(f"line {fields['vocab'][0]}: empty vocab identifier")
    return BridgeHeader(BRIDGE_FORMAT_VERSION, alphabet, vocab_id, budget_value)


def read_bridge(
    source: Union[str, TextIO],
    expected_alphabet: Optional[Sequence[str]] = None,
    expected_vocab_id: Optional[str] = None,
) -> BridgeData:
    """Parse and validate a bridge file; single streaming pass.

    Groups records by (doc, sentence); each group's piece indices must
    run contiguously from 0 and groups must not interleave. Expected
    alphabet/vocab mismatches are hard errors listing both sides.
    """
    if hasattr(source, "read"):
        source = source.read()
    lines = source.splitlines()

    header_lines = []
    body_start = 0
    for lineno, line in enumerate(lines, 1):
        if line.startswith("#"):
            header_lines.append((lineno, line))
            body_start = lineno
        elif line.strip():
            break
        else:
            body_start = lineno
    header = _parse_header(header_lines)

    if expected_alphabet is not None and tuple(expected_alphabet) != header.alphabet:
        raise BridgeError(
            "alphabet mismatch: bridge file declares "
            f"{list(header.alphabet)}, consumer expects {list(expected_alphabet)}"
        )
    if expected_vocab_id is not None and expected_vocab_id != header.vocab_id:
        raise BridgeError(
            f"vocabulary mismatch: bridge file declares {header.vocab_id!r}, "
            f"consumer expects {expected_vocab_id!r}"
        )

    m = len(header.alphabet)
    groups: dict = {}
    finished: set = set()
    current: Optional[tuple[str, int]] = None
    docs_seen: set = set()
    previous_doc: Optional[str] = None

    for lineno, line in enumerate(lines[body_start:], body_start + 1):
        if not line.strip() or line.startswith("#"):
            if line.startswith("#"):
                raise BridgeError(f"line {lineno}: header line after body start")
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise BridgeError(f"line {lineno}: expected 6 tab-separated fields, got {len(parts)}")
        doc_id, sent_text, piece_text, surface, word_text, score_text = parts
        try:
            sent = int(sent_text)
            piece = int(piece_text)
            word = int(word_text)
        except ValueError:
            raise BridgeError(f"line {lineno}: non-integer sentence/piece/word index") from None
        if sent < 0 or piece < 0 or word < 0:
            raise BridgeError(f"line {lineno}: negative index")
        try:
            scores = tuple(float(v) for v in score_text.split())
        except ValueError:
            raise BridgeError(f"line {lineno}: malformed score vector") from None
        if len(scores) != m:
            raise BridgeError(
                f"line {lineno}: {len(scores)} scores for an alphabet of {m}"
            )

        key = (doc_id, sent)
        if key != current:
            if key in finished:
                raise BridgeError(
                    f"line {lineno}: records for doc {doc_id!r} sentence {sent} are not contiguous"
                )
            if current is not None:
                finished.add(current)
            if doc_id != previous_doc:
                if doc_id in docs_seen:
                    raise BridgeError(
                        f"line {lineno}: records for doc {doc_id!r} are not contiguous"
                    )
                docs_seen.add(doc_id)
                previous_doc = doc_id
            elif current is not None and sent <= current[1]:
                raise BridgeError(
                    f"line {lineno}: sentence indices out of order in doc {doc_id!r}"
                )
            current = key
            groups[key] = []
        expected_piece = len(groups[key])
        if piece != expected_piece:
            raise BridgeError(
                f"line {lineno}: doc {doc_id!r} sentence {sent}: "
                f"expected piece {expected_piece}, got {piece}"
            )
        groups[key].append(
            LogitsRecord(doc_id, sent, piece, surface, word, scores)
        )

    return BridgeData(header, {k: tuple(v) for k, v in groups.items()})


def decode_scores(
    records: Sequence[LogitsRecord],
    aligned: AlignedSentence,
    alphabet: Sequence[str],
    mode: str = "constrained",
) -> list[BioTag]:
    """Word-level tags from per-piece score vectors.

    Selects each word's first-piece vector. argmax mode takes per-word
    argmax (lowest index on ties) then begin-mode repair; constrained
    mode runs Viterbi with 0 scores on schema-valid transitions and
    -inf on invalid ones, so its output needs no repair.
    """
    if mode not in ("argmax", "constrained"):
        raise ValueError(f"mode must be argmax or constrained, got {mode!r}")
    if len(records) != aligned.piece_count:
        raise BridgeError(
            f"{len(records)} records for {aligned.piece_count} pieces"
        )
    for i, (record, piece, word) in enumerate(
        zip(records, aligned.pieces, aligned.word_index)
    ):
        if record.surface != piece:
            raise BridgeError(
                f"piece {i}: bridge surface {record.surface!r} does not match "
                f"tokenizer output {piece!r} (vocabulary or chunking drift)"
            )
        if record.word_index != word:
            raise BridgeError(
                f"piece {i}: bridge word_index {record.word_index} does not match "
                f"tokenizer alignment {word}"
            )

    rows = np.array(
        [records[i].scores for i in aligned.first_piece_index], dtype=float
    )
    tags = [BioTag.parse(label) for label in alphabet]
    if mode == "argmax":
        indices = np.argmax(rows, axis=1)
        return repair_bio([tags[i] for i in indices], "begin")
    trans_mask, begin_mask = bio_constraint_masks(alphabet)
    indices, _ = chain.viterbi(rows, trans_mask, begin_mask, np.zeros(len(alphabet)))
    return [tags[i] for i in indices]


def predict_corpus(
    source: Union[str, TextIO],
    corpus: Corpus,
    vocab: Vocabulary,
    mode: str = "constrained",
    label_set: Optional[LabelSet] = None,
) -> Corpus:
    """Decode a bridge file over a corpus into a tagged corpus.

    The file must cover every sentence (missing coverage errors list
    the gaps) and declare the consumer's vocabulary; when label_set is
    given its tag alphabet must match the header exactly, otherwise
    the header alphabet is adopted.
    """
    expected = tuple(label_set.tag_strings) if label_set is not None else None
    data = read_bridge(source, expected, vocab.identifier)
    alphabet = data.header.alphabet
    if label_set is None:
        types: dict[str, None] = {}
        for label in alphabet:
            tag = BioTag.parse(label)
            if tag.is_entity:
                types[tag.entity_type] = None
        label_set = LabelSet(tuple(types))

    wanted = []
    for doc in corpus.documents:
        for s in range(len(doc.sentences)):
            wanted.append((doc.id, s))
    missing = [key for key in wanted if key not in data.groups]
    if missing:
        raise BridgeError(
            "bridge file does not cover: "
            + ", ".join(f"{doc!r}[{s}]" for doc, s in missing[:20])
            + ("..." if len(missing) > 20 else "")
        )
    extra = data.groups.keys() - set(wanted)
    if extra:
        raise BridgeError(
            "bridge file contains sentences outside the corpus: "
            + ", ".join(f"{doc!r}[{s}]" for doc, s in sorted(extra)[:20])
        )

    documents = []
    for doc in corpus.documents:
        tagged = []
        for s, sentence in enumerate(doc.sentences):
            aligned = tokenize_sentence(sentence, vocab)
            tags = decode_scores(data.groups[(doc.id, s)], aligned, alphabet, mode)
            tagged.append(sentence.with_tags(tuple(tags)))
        documents.append(Document(doc.id, tuple(tagged), doc.source_text))
    return Corpus(tuple(documents), label_set)


def write_bridge(
    sink: TextIO,
    header: BridgeHeader,
    records: Iterable[LogitsRecord],
) -> None:
    """Serialize in wire order; floats use shortest round-trip form."""
    sink.write(f"#version {header.version}\n")
    sink.write("#alphabet " + "\t".join(header.alphabet) + "\n")
    sink.write(f"#vocab {header.vocab_id}\n")
    sink.write(f"#budget {header.budget}\n")
    for r in records:
        scores = " ".join(repr(float(v)) for v in r.scores)
        sink.write(
            f"{r.doc_id}\t{r.sentence_index}\t{r.piece_index}\t"
            f"{r.surface}\t{r.word_index}\t{scores}\n"
        )


def synthesize_onehot_records(
    corpus: Corpus,
    vocab: Vocabulary,
    label_set: LabelSet,
    hot: float = 1.0,
) -> list[LogitsRecord]:
    """Per-piece one-hot score records from gold tags (test fixture
    generator and exporter reference). Every piece of a word carries
    the word tag's one-hot vector."""
    index = {tag: i for i, tag in enumerate(label_set.tag_strings)}
    records = []
    for doc in corpus.documents:
        for s, sentence in enumerate(doc.sentences):
            if sentence.tags is None:
                raise ValueError(f"document {doc.id!r} sentence {s} is untagged")
            aligned = tokenize_sentence(sentence, vocab)
            for p, (piece, w) in enumerate(zip(aligned.pieces, aligned.word_index)):
                scores = [0.0] * len(index)
                scores[index[str(sentence.tags[w])]] = hot
                records.append(LogitsRecord(doc.id, s, p, piece, w, tuple(scores)))
    return records
