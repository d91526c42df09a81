"""Data model, BIO codec, CoNLL/BRAT parsing, and dataset splitting."""

from protoner.corpus.bio import (
    BioViolation,
    bio_decode,
    bio_encode,
    repair_bio,
    validate_bio,
)
from protoner.corpus.brat import parse_brat
from protoner.corpus.conll import parse_conll, write_conll
from protoner.corpus.split import SplitRng, split_dataset, split_sizes
from protoner.corpus.types import (
    BioTag,
    Corpus,
    Document,
    EntitySpan,
    LabelSet,
    O,
    Sentence,
    Token,
    sentence_from_words,
)

__all__ = [
    "BioTag",
    "BioViolation",
    "Corpus",
    "Document",
    "EntitySpan",
    "LabelSet",
    "O",
    "Sentence",
    "SplitRng",
    "Token",
    "bio_decode",
    "bio_encode",
    "parse_brat",
    "parse_conll",
    "repair_bio",
    "sentence_from_words",
    "split_dataset",
    "split_sizes",
    "validate_bio",
    "write_conll",
]
