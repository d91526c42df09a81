"""Log-space inference for linear chains.

Operates on raw score arrays, independent of features or labels:
unary is (n, m), transition is (m, m) from-row to-column, begin and
end are (m,) boundary scores. A tag sequence y scores

    begin[y0] + sum_t unary[t, yt] + sum_t trans[y_{t-1}, yt] + end[y_{n-1}]

All recursions stay in log space (log-sum-exp); -inf entries act as
hard constraints and never produce NaNs in the quantities returned.
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp


def sequence_score(
    unary: np.ndarray,
    transition: np.ndarray,
    begin: np.ndarray,
    end: np.ndarray,
    labels: np.ndarray,
) -> float:
    """Unnormalized log-score of one label-index sequence."""
    n = unary.shape[0]
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} positions")
    score = begin[labels[0]] + end[labels[-1]]
    score += unary[np.arange(n), labels].sum()
    if n > 1:
        score += transition[labels[:-1], labels[1:]].sum()
    return float(score)


def log_partition(
    unary: np.ndarray,
    transition: np.ndarray,
    begin: np.ndarray,
    end: np.ndarray,
) -> float:
    """log of the sum of exp(score) over all m^n sequences (forward pass)."""
    alpha = begin + unary[0]
    for t in range(1, unary.shape[0]):
        alpha = logsumexp(alpha[:, None] + transition, axis=0) + unary[t]
    return float(logsumexp(alpha + end))


def forward_backward(
    unary: np.ndarray,
    transition: np.ndarray,
    begin: np.ndarray,
    end: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact posterior marginals.

    Returns (logZ, node, edge): node is (n, m) with node[t] the label
    distribution at t; edge is (n-1, m, m) with edge[t, i, j] the joint
    probability of labels (i at t, j at t+1). Rows of edge sum to the
    matching node entries.
    """
    n, m = unary.shape
    alpha = np.empty((n, m))
    alpha[0] = begin + unary[0]
    for t in range(1, n):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + transition, axis=0) + unary[t]

    beta = np.empty((n, m))
    beta[n - 1] = end
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(transition + (unary[t + 1] + beta[t + 1])[None, :], axis=1)

    log_z = float(logsumexp(alpha[n - 1] + beta[n - 1]))
    node = np.exp(alpha + beta - log_z)

    edge = np.empty((max(n - 1, 0), m, m))
    for t in range(n - 1):
        log_edge = (
            alpha[t][:, None]
            + transition
            + (unary[t + 1] + beta[t + 1])[None, :]
            - log_z
        )
        edge[t] = np.exp(log_edge)
    return log_z, node, edge


def viterbi(
    unary: np.ndarray,
    transition: np.ndarray,
    begin: np.ndarray,
    end: np.ndarray,
) -> tuple[list[int], float]:
    """Highest-scoring label sequence and its score.

    Ties break toward the lower label index at every step (argmax takes
    the first maximum), so decoding is deterministic across platforms.
    """
    n, m = unary.shape
    delta = begin + unary[0]
    backptr = np.empty((n, m), dtype=np.int64)
    for t in range(1, n):
        candidates = delta[:, None] + transition
        backptr[t] = np.argmax(candidates, axis=0)
        delta = candidates[backptr[t], np.arange(m)] + unary[t]

    final = delta + end
    last = int(np.argmax(final))
    best = float(final[last])
    if best == -np.inf:
        raise ValueError("no admissible label sequence under the given constraints")

    labels = [0] * n
    labels[n - 1] = last
    for t in range(n - 1, 0, -1):
        labels[t - 1] = int(backptr[t, labels[t]])
    return labels, best
