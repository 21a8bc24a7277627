"""Weighted isotonic projections used for the monotone constraint sets."""

import numpy as np
from scipy.optimize import isotonic_regression


def isotonic(y, weights):
    """Weighted least-squares projection onto non-decreasing sequences.

    Returns (x, blocks) where blocks[j]:blocks[j+1] are the pooled index ranges.
    """
    res = isotonic_regression(np.asarray(y, dtype=float), weights=np.asarray(weights, dtype=float))
    return res.x, res.blocks


def monotone_zero_mean(y, weights):
    """Projection onto {non-decreasing, sum(weights * x) = 0} in the weighted norm.

    Pooling preserves the weighted mean and the monotone set is invariant
    under constant shifts, so the two projections commute.
    """
    x, blocks = isotonic(y, weights)
    x = x - np.dot(weights, x) / weights.sum()
    return x, blocks


def monotone_nonnegative(y, weights):
    """Projection onto {non-decreasing, x >= 0}: isotonic fit clipped at zero."""
    x, _ = isotonic(y, weights)
    return np.maximum(x, 0.0)


def block_matrix(blocks, size):
    """Indicator matrix (size x nblocks) of consecutive index blocks."""
    blocks = np.asarray(blocks)
    B = np.zeros((size, blocks.size - 1))
    for j in range(blocks.size - 1):
        B[blocks[j]:blocks[j + 1], j] = 1.0
    return B


def tie_blocks(x, rtol=1e-13):
    """Block boundaries of runs of (numerically) equal consecutive values."""
    x = np.asarray(x, dtype=float)
    scale = max(np.abs(x).max(), 1e-300)
    cut = np.nonzero(np.abs(np.diff(x)) > rtol * scale)[0] + 1
    return np.concatenate([[0], cut, [x.size]])
