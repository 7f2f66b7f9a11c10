"""One-sided Wilcoxon signed-rank test (alternative: x tends to be less than y)."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from ..errors import DegenerateTestError
from ..stats import std_normal_cdf

EXACT_MAX_N = 25


def _exact_cdf(doubled_ranks: np.ndarray, w2: int) -> float:
    """P(2 W+ <= w2) under random signs, by counting subsets of the ranks."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    n = len(doubled_ranks)
    favourable = sum(counts[: w2 + 1])
    return float(favourable) / float(2**n)


def wilcoxon_signed_rank(x, y) -> float:
    """p-value for H1: x is stochastically less than y, paired.

    Zero differences are dropped. Ties get mid-ranks. Exact null
    distribution when at most 25 non-zero differences remain, otherwise a
    tie-corrected normal approximation with continuity correction.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be paired 1-D samples")
    if x.size < 5:
        raise ValueError("need at least 5 pairs")
    d = x - y
    d = d[d != 0]
    if d.size == 0:
        raise DegenerateTestError("all paired differences are zero")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    n = d.size
    if n <= EXACT_MAX_N:
        # mid-ranks are multiples of 1/2
        doubled = np.rint(2 * ranks).astype(int)
        return min(1.0, _exact_cdf(doubled, int(round(2 * w_plus))))
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    z = (w_plus - mean + 0.5) / math.sqrt(var)
    return float(min(1.0, max(std_normal_cdf(z), np.finfo(float).tiny)))
