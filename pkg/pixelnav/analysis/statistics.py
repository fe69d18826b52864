"""Paired two-sided Wilcoxon signed-rank test"""

from typing import Dict, NamedTuple, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from ..core.exceptions import LengthMismatch, NoNonzeroDifferences, TooFewPairs

MIN_PAIRS = 5
EXACT_MAX_PAIRS = 25


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float
    n: int
    method: str


def _exact_lower_tail(doubled_ranks: np.ndarray, w2: int) -> float:
    """P(T+ <= W) under the null, counting all 2^n sign assignments on doubled ranks"""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return float(counts[:w2 + 1].sum() / counts.sum())


def wilcoxon_signed_rank(errors_a: Sequence[float], errors_b: Sequence[float]) -> WilcoxonResult:
    """
    Two-sided signed-rank test on paired samples

    Zero differences are dropped, tied magnitudes get average ranks.
    The statistic is the smaller of the positive and negative rank sums.
    With at most 25 pairs the p-value comes from the exact null
    distribution, otherwise from the normal approximation with tie
    correction.

    Raises:
        LengthMismatch: samples are not paired
        NoNonzeroDifferences: every difference is zero
        TooFewPairs: fewer than 5 non-zero differences
    """
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"Paired samples differ in length: {len(a)} vs {len(b)}")

    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise NoNonzeroDifferences("All paired differences are zero")
    if n < MIN_PAIRS:
        raise TooFewPairs(f"Need at least {MIN_PAIRS} non-zero differences, got {n}")

    ranks = rankdata(np.abs(d))
    t_plus = float(ranks[d > 0].sum())
    t_minus = float(ranks[d < 0].sum())
    w = min(t_plus, t_minus)

    if n <= EXACT_MAX_PAIRS:
        # average ranks are multiples of 1/2
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = 2.0 * _exact_lower_tail(doubled, int(round(2 * w)))
        return WilcoxonResult(w, min(1.0, p), n, 'exact')

    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    z = (w - mean) / np.sqrt(var)
    p = 2.0 * float(norm.cdf(z))
    return WilcoxonResult(w, min(1.0, p), n, 'normal')


def compare_methods(reference: Dict[str, np.ndarray], other: Dict[str, np.ndarray]) -> Dict[str, Dict]:
    """Signed-rank test per metric; metrics where the test is undefined get the reason instead"""
    results: Dict[str, Dict] = {}
    for metric, values in reference.items():
        try:
            r = wilcoxon_signed_rank(values, other[metric])
            results[metric] = {'statistic': r.statistic, 'p_value': r.p_value, 'n': r.n, 'method': r.method}
        except TooFewPairs as e:
            results[metric] = {'error': str(e)}
    return results
