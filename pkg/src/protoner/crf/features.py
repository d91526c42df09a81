"""Hand-crafted feature templates and gazetteers for the CRF baseline.

A template names one observation kind evaluated at a window offset in
[-2, +2] relative to the current position. Offsets falling outside the
sentence emit BOS/EOS boundary markers instead. All features are
binary; a position's feature vector is the set of fired feature ids.
"""
from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, TextIO, Union

from protoner.corpus.types import Corpus, Sentence
from protoner.errors import DataError

_SIMPLE_KINDS = frozenset(
    {"word-lower", "word-shape", "is-digit", "is-punct", "contains-digit", "sentence-position"}
)
_AFFIX_KINDS = frozenset(f"{side}-{k}" for side in ("prefix", "suffix") for k in (1, 2, 3, 4))
GAZETTEER_KIND_PREFIX = "gazetteer:"
MIN_OFFSET, MAX_OFFSET = -2, 2


@dataclass(frozen=True)
class FeatureTemplate:
    """One observation kind at one window offset."""

    kind: str
    offset: int = 0

    def __post_init__(self):
        if not (MIN_OFFSET <= self.offset <= MAX_OFFSET):
            raise ValueError(f"offset {self.offset} outside [{MIN_OFFSET}, {MAX_OFFSET}]")
        valid = (
            self.kind in _SIMPLE_KINDS
            or self.kind in _AFFIX_KINDS
            or (self.kind.startswith(GAZETTEER_KIND_PREFIX) and len(self.kind) > len(GAZETTEER_KIND_PREFIX))
        )
        if not valid:
            raise ValueError(f"unknown feature template kind {self.kind!r}")

    def __str__(self) -> str:
        return f"{self.kind}@{self.offset:+d}"

    @classmethod
    def parse(cls, text: str) -> "FeatureTemplate":
        """Inverse of str(): "kind@offset", e.g. "word-lower@-1"."""
        kind, sep, offset = text.rpartition("@")
        if not sep or not kind:
            raise ValueError(f"template must look like kind@offset, got {text!r}")
        try:
            return cls(kind, int(offset))
        except ValueError as exc:
            raise ValueError(f"bad template {text!r}: {exc}") from None


@dataclass(frozen=True)
class Gazetteer:
    """A named lexicon matched by exact case-normalized token lookup."""

    name: str
    entries: frozenset

    def __post_init__(self):
        if not self.name:
            raise ValueError("gazetteer needs a name")
        if not self.entries:
            raise ValueError(f"gazetteer {self.name!r} has no entries")
        normalized = frozenset(normalize_entry(e) for e in self.entries)
        object.__setattr__(self, "entries", normalized)

    def __contains__(self, token_text: str) -> bool:
        return normalize_entry(token_text) in self.entries

    @property
    def template_kind(self) -> str:
        return GAZETTEER_KIND_PREFIX + self.name


def normalize_entry(text: str) -> str:
    return text.lower()


def load_gazetteer(name: str, source: Union[str, TextIO]) -> Gazetteer:
    """Read one entry per line; blank lines skipped."""
    if hasattr(source, "read"):
        source = source.read()
    entries = frozenset(line.strip() for line in source.splitlines() if line.strip())
    if not entries:
        raise DataError(f"gazetteer {name!r}: no entries in input")
    return Gazetteer(name, entries)


def harvest_gazetteers(corpus: Corpus) -> list[Gazetteer]:
    """Collect per-type token surfaces from a tagged corpus.

    Every token inside an entity span contributes its surface to that
    type's lexicon; types with no occurrences yield no gazetteer.
    """
    surfaces: dict[str, set] = {}
    for doc in corpus.documents:
        for sentence in doc.sentences:
            if sentence.tags is None:
                continue
            for token, tag in zip(sentence.tokens, sentence.tags):
                if tag.is_entity:
                    surfaces.setdefault(tag.entity_type, set()).add(normalize_entry(token.text))
    return [Gazetteer(name, frozenset(entries)) for name, entries in sorted(surfaces.items())]


def default_templates(gazetteer_names: Sequence[str] = ()) -> tuple[FeatureTemplate, ...]:
    """The stock template inventory; every kind is individually toggleable
    by passing an explicit template list instead."""
    templates = [FeatureTemplate("word-lower", off) for off in range(-2, 3)]
    templates += [FeatureTemplate("word-shape", off) for off in range(-1, 2)]
    templates += [FeatureTemplate(f"prefix-{k}") for k in (1, 2, 3, 4)]
    templates += [FeatureTemplate(f"suffix-{k}") for k in (1, 2, 3, 4)]
    templates += [
        FeatureTemplate("is-digit"),
        FeatureTemplate("is-punct"),
        FeatureTemplate("contains-digit"),
        FeatureTemplate("sentence-position"),
    ]
    for name in gazetteer_names:
        templates += [
            FeatureTemplate(GAZETTEER_KIND_PREFIX + name, off) for off in (-1, 0, 1)
        ]
    return tuple(templates)


def parse_template_config(source: Union[str, TextIO]) -> tuple[FeatureTemplate, ...]:
    """One template per line in str() form; '#' starts a comment."""
    if hasattr(source, "read"):
        source = source.read()
    templates = []
    for lineno, line in enumerate(source.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            templates.append(FeatureTemplate.parse(body))
        except ValueError as exc:
            raise DataError(f"template config line {lineno}: {exc}") from None
    if not templates:
        raise DataError("template config declares no templates")
    return tuple(templates)


def word_shape(text: str) -> str:
    """X for upper, x for lower, d for digit; everything else verbatim."""
    out = []
    for c in text:
        if c.isdigit():
            out.append("d")
        elif c.isupper():
            out.append("X")
        elif c.islower():
            out.append("x")
        else:
            out.append(c)
    return "".join(out)


def _is_punct(text: str) -> bool:
    return bool(text) and all(
        c in string.punctuation or unicodedata.category(c).startswith("P") for c in text
    )


def feature_strings(
    sentence: Sentence,
    position: int,
    templates: Sequence[FeatureTemplate],
    gazetteers: Sequence[Gazetteer] = (),
) -> tuple[str, ...]:
    """Fired feature names at one position, deduplicated, order-stable."""
    n = len(sentence)
    if not (0 <= position < n):
        raise ValueError(f"position {position} outside sentence of length {n}")
    by_name: Mapping[str, Gazetteer] = {g.name: g for g in gazetteers}

    fired: dict[str, None] = {}
    for template in templates:
        index = position + template.offset
        if index < 0:
            fired[f"BOS@{template.offset:+d}"] = None
            continue
        if index >= n:
            fired[f"EOS@{template.offset:+d}"] = None
            continue
        text = sentence.tokens[index].text
        kind = template.kind
        tag = str(template)
        if kind == "word-lower":
            fired[f"{tag}={text.lower()}"] = None
        elif kind == "word-shape":
            fired[f"{tag}={word_shape(text)}"] = None
        elif kind.startswith("prefix-"):
            k = int(kind[len("prefix-"):])
            if len(text) >= k:
                fired[f"{tag}={text[:k]}"] = None
        elif kind.startswith("suffix-"):
            k = int(kind[len("suffix-"):])
            if len(text) >= k:
                fired[f"{tag}={text[-k:]}"] = None
        elif kind == "is-digit":
            if text.isdigit():
                fired[tag] = None
        elif kind == "is-punct":
            if _is_punct(text):
                fired[tag] = None
        elif kind == "contains-digit":
            if any(c.isdigit() for c in text):
                fired[tag] = None
        elif kind == "sentence-position":
            if index == 0:
                fired[f"{tag}=first"] = None
            if index == n - 1:
                fired[f"{tag}=last"] = None
        elif kind.startswith(GAZETTEER_KIND_PREFIX):
            name = kind[len(GAZETTEER_KIND_PREFIX):]
            gazetteer = by_name.get(name)
            if gazetteer is not None and text in gazetteer:
                fired[tag] = None
    return tuple(fired)


def extract_features(
    sentence: Sentence,
    position: int,
    templates: Sequence[FeatureTemplate],
    gazetteers: Sequence[Gazetteer],
    feature_dict: Mapping[str, int],
) -> dict[int, float]:
    """Map fired feature names through the model's dictionary.

    Names absent from the dictionary (unseen at training time) are
    dropped. All present features carry value 1.0.
    """
    vector: dict[int, float] = {}
    for name in feature_strings(sentence, position, templates, gazetteers):
        idx = feature_dict.get(name)
        if idx is not None:
            vector[idx] = 1.0
    return vector
