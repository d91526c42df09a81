"""Shared fixtures: a toy vocabulary, a deterministic tagged sample,
and a tiny randomly initialized checkpoint (no network, no downloads)."""
import random

import pytest

from protoner_adapter import fresh_checkpoint, load_vocab
from protoner_adapter.conll import Document, Sentence

VOCAB_TEXT = "[UNK]\n[CLS]\n[SEP]\naa\nbb\ncc\ndd\nun\n##aff\n##able\nmix\n"

REAGENTS = ["aa"]
DEVICES = ["bb"]
FILLERS = ["cc", "dd", "mix", "unaffable"]


def build_documents(n_sentences: int, seed: int = 3) -> list[Document]:
    """One sentence per document; tags are a function of the word, with
    Reagent runs of length 1 or 2 so I- tags occur."""
    rng = random.Random(seed)
    documents = []
    for i in range(n_sentences):
        words: list[str] = []
        tags: list[str] = []
        target = 3 + rng.randrange(4)
        while len(words) < target:
            roll = rng.randrange(10)
            if roll < 5 or (tags and tags[-1] != "O"):
                words.append(rng.choice(FILLERS))
                tags.append("O")
            elif roll < 8:
                words.append(REAGENTS[0])
                tags.append("B-Reagent")
                if rng.randrange(2) and len(words) < target:
                    words.append(REAGENTS[0])
                    tags.append("I-Reagent")
            else:
                words.append(DEVICES[0])
                tags.append("B-Device")
        documents.append(Document(f"doc{i}", (Sentence(tuple(words), tuple(tags)),)))
    return documents


@pytest.fixture
def make_documents():
    return build_documents


@pytest.fixture
def vocab():
    return load_vocab(VOCAB_TEXT)


@pytest.fixture
def documents():
    return build_documents(6)


@pytest.fixture
def sample50():
    return build_documents(50)


@pytest.fixture
def tiny_checkpoint(vocab):
    return fresh_checkpoint(
        ("Reagent", "Device"), vocab,
        hidden_size=32, num_layers=1, num_heads=2, intermediate_size=64,
        max_positions=64, seed=0,
    )
