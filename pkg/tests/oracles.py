"""Brute-force enumeration oracles, deliberately stdlib-only.

These re-derive every inference quantity by explicit summation over
all m^n tag sequences, sharing no code (and no numerics library) with
the implementation under test. Inputs are nested lists.
"""
from __future__ import annotations

import itertools
import math


def _logaddexp(a: float, b: float) -> float:
    hi, lo = (a, b) if a >= b else (b, a)
    if hi == float("-inf"):
        return hi
    return hi + math.log1p(math.exp(lo - hi))


def enum_score(unary, trans, begin, end, seq) -> float:
    score = begin[seq[0]] + end[seq[-1]]
    for t, y in enumerate(seq):
        score += unary[t][y]
    for t in range(1, len(seq)):
        score += trans[seq[t - 1]][seq[t]]
    return score


def _sequences(n: int, m: int):
    return itertools.product(range(m), repeat=n)


def enum_log_partition(unary, trans, begin, end) -> float:
    n, m = len(unary), len(unary[0])
    total = float("-inf")
    for seq in _sequences(n, m):
        total = _logaddexp(total, enum_score(unary, trans, begin, end, seq))
    return total


def enum_marginals(unary, trans, begin, end):
    """(node, edge) as nested lists of exact posterior probabilities."""
    n, m = len(unary), len(unary[0])
    log_z = enum_log_partition(unary, trans, begin, end)
    node = [[0.0] * m for _ in range(n)]
    edge = [[[0.0] * m for _ in range(m)] for _ in range(n - 1)]
    for seq in _sequences(n, m):
        p = math.exp(enum_score(unary, trans, begin, end, seq) - log_z)
        for t, y in enumerate(seq):
            node[t][y] += p
        for t in range(1, n):
            edge[t - 1][seq[t - 1]][seq[t]] += p
    return node, edge


def enum_viterbi(unary, trans, begin, end):
    """(best sequence, best score); first in lexicographic order on ties."""
    n, m = len(unary), len(unary[0])
    best_seq, best_score = None, float("-inf")
    for seq in _sequences(n, m):
        score = enum_score(unary, trans, begin, end, seq)
        if score > best_score:
            best_seq, best_score = list(seq), score
    return best_seq, best_score


def central_difference(fn, x0: list, coord: int, h: float = 1e-5) -> float:
    """Symmetric finite-difference derivative of fn at x0 along coord."""
    up = list(x0)
    down = list(x0)
    up[coord] += h
    down[coord] -= h
    return (fn(up) - fn(down)) / (2 * h)
