"""Shared corpus builders for the test suite."""
from __future__ import annotations

from typing import Optional, Sequence

from protoner.corpus.split import SplitRng
from protoner.corpus.types import Corpus, Document, LabelSet, sentence_from_words

REAGENTS = ["nacl", "kcl", "etoh", "sds", "tris"]
DEVICES = ["pipette", "vortexer", "shaker", "incubator"]
FILLERS = ["add", "the", "to", "mix", "then", "remove", "or", "with"]


def corpus_of(
    sentence_specs: Sequence[tuple[Sequence[str], Optional[Sequence[str]]]],
    types: Sequence[str],
    doc_id: str = "doc",
) -> Corpus:
    """One document holding the given (words, tags) sentences."""
    sentences = tuple(
        sentence_from_words(words, tags) for words, tags in sentence_specs
    )
    return Corpus((Document(doc_id, sentences),), LabelSet(tuple(types)))


def separable_corpus(seed: int, n_sentences: int) -> Corpus:
    """A corpus whose tags are a deterministic function of a +-1 window.

    Reagent runs are B (length 1) or B,I (length 2); entity runs are
    always separated by a filler, so I-Reagent fires exactly when the
    current and previous words are both reagents. Devices are single
    words. A window-1 gazetteer feature set separates this perfectly.
    """
    rng = SplitRng(seed)
    docs = []
    for i in range(n_sentences):
        words: list[str] = []
        tags: list[str] = []
        target = 5 + rng.next_below(5)
        while len(words) < target:
            roll = rng.next_below(10)
            if roll < 5 or (words and tags[-1] != "O"):
                words.append(FILLERS[rng.next_below(len(FILLERS))])
                tags.append("O")
            elif roll < 8:
                words.append(REAGENTS[rng.next_below(len(REAGENTS))])
                tags.append("B-Reagent")
                if rng.next_below(2) and len(words) < target:
                    words.append(REAGENTS[rng.next_below(len(REAGENTS))])
                    tags.append("I-Reagent")
            else:
                words.append(DEVICES[rng.next_below(len(DEVICES))])
                tags.append("B-Device")
        docs.append(Document(f"doc{i}", (sentence_from_words(words, tags),)))
    return Corpus.from_documents(tuple(docs))


def random_tag_sequence(rng: SplitRng, length: int, types: Sequence[str]) -> list[str]:
    """A uniformly random schema-valid BIO sequence."""
    tags: list[str] = []
    for i in range(length):
        prev = tags[-1] if tags else None
        choices = ["O"] + [f"B-{t}" for t in types]
        if prev is not None and prev != "O":
            choices.append(f"I-{prev.split('-', 1)[1]}")
        tags.append(choices[rng.next_below(len(choices))])
    return tags
