"""Deterministic document-level dataset splitting.

Shuffling uses an explicit 64-bit linear congruential generator
(state <- state * 6364136223846793005 + 1442695040888963407 mod 2^64,
draws take the top 31 bits) so any implementation of the same constants
reproduces identical splits from the same seed.
"""
from __future__ import annotations

from typing import Sequence

from protoner.corpus.types import Corpus

_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_LCG_MASK = (1 << 64) - 1


class SplitRng:
    """Minimal seeded LCG used for splits and SGD shuffling."""

    def __init__(self, seed: int):
        self.state = seed & _LCG_MASK

    def next_below(self, bound: int) -> int:
        """Advance and return a value in [0, bound)."""
        self.state = (self.state * _LCG_MULT + _LCG_INC) & _LCG_MASK
        return (self.state >> 33) % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, high index first."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]


def split_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    """floor(ratio * n) per split, remainder going to earlier splits."""
    sizes = [int(r * n) for r in ratios]
    remainder = n - sum(sizes)
    for i in range(remainder):
        sizes[i % len(sizes)] += 1
    return sizes


def split_dataset(corpus: Corpus, ratios: Sequence[float], seed: int) -> list[Corpus]:
    """Partition the corpus at document granularity.

    Ratios must be positive and sum to 1 (tolerance 1e-9). The result is
    deterministic for a fixed seed: pairwise disjoint, jointly exhaustive.
    """
    if not ratios:
        raise ValueError("need at least one ratio")
    if any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive: {list(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    if len(ratios) > len(corpus.documents):
        raise ValueError(
            f"cannot make {len(ratios)} splits out of {len(corpus.documents)} documents"
        )

    order = list(corpus.documents)
    SplitRng(seed).shuffle(order)

    sizes = split_sizes(len(order), ratios)
    splits = []
    cursor = 0
    for size in sizes:
        docs = tuple(order[cursor:cursor + size])
        splits.append(Corpus(docs, corpus.label_set))
        cursor += size
    return splits
