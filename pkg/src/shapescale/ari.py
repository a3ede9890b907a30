"""Adjusted Rand Index under a fixed number of clusters.

The expected Rand Index is taken over partitions that all have exactly ``C``
clusters, which replaces the hypergeometric model of the classic ARI with a
ratio of Stirling numbers of the second kind::

    U = S(n - 1, C) / S(n, C)
    V = (TS + FD) / binom(n, 2)
    E[RI] = U*V + (1 - U)*(1 - V)
    ARI_fnc = (RI - E[RI]) / (1 - E[RI])

``V`` counts pairs co-clustered in the *reference* partition, so the score
is not symmetric in its arguments: the reference always comes first.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .exceptions import DataError, NumericalError

EXACT_STIRLING_MAX = 200

__all__ = [
    "PairCounts",
    "AriReport",
    "pair_counts",
    "pair_counts_bruteforce",
    "rand_index",
    "stirling2",
    "stirling_ratio",
    "stirling_ratio_exact",
    "ari_fnc",
    "ari_fnc_score",
]


@dataclass(frozen=True)
class PairCounts:
    """Pair tallies of an obtained partition against a reference.

    ``TS``: together in both. ``TD``: apart in both. ``FD``: together in the
    reference, apart in the obtained partition. ``FS``: the converse.
    """

    TS: int
    TD: int
    FD: int
    FS: int

    @property
    def total(self):
        return self.TS + self.TD + self.FD + self.FS


@dataclass(frozen=True)
class AriReport:
    ri: float
    expected_ri: float
    u: float
    v: float
    ari_fnc: float
    counts: PairCounts = None


def _labels(x):
    if hasattr(x, "labels"):
        x = x.labels
    return np.asarray(x)


def _comb2(k):
    return k * (k - 1) // 2


def pair_counts(reference, obtained):
    """Pair tallies via the contingency table (exact integer arithmetic)."""
    ref, obt = _labels(reference), _labels(obtained)
    if ref.shape != obt.shape or ref.ndim != 1:
        raise DataError(f"partition lengths differ: {ref.shape} vs {obt.shape}")
    n = ref.size
    _, ref_codes = np.unique(ref, return_inverse=True)
    _, obt_codes = np.unique(obt, return_inverse=True)
    table = np.zeros((ref_codes.max(initial=-1) + 1, obt_codes.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ref_codes, obt_codes), 1)
    ts = sum(_comb2(int(c)) for c in table.ravel())
    same_ref = sum(_comb2(int(c)) for c in table.sum(axis=1))
    same_obt = sum(_comb2(int(c)) for c in table.sum(axis=0))
    fd = same_ref - ts
    fs = same_obt - ts
    td = _comb2(n) - ts - fd - fs
    return PairCounts(TS=ts, TD=td, FD=fd, FS=fs)


def pair_counts_bruteforce(reference, obtained):
    """Pair tallies by enumerating every pair. O(n**2); used as a check."""
    ref, obt = _labels(reference), _labels(obtained)
    if ref.shape != obt.shape or ref.ndim != 1:
        raise DataError(f"partition lengths differ: {ref.shape} vs {obt.shape}")
    ts = td = fd = fs = 0
    n = ref.size
    for i in range(n):
        for j in range(i + 1, n):
            same_r = ref[i] == ref[j]
            same_o = obt[i] == obt[j]
            if same_r and same_o:
                ts += 1
            elif same_r:
                fd += 1
            elif same_o:
                fs += 1
            else:
                td += 1
    return PairCounts(TS=ts, TD=td, FD=fd, FS=fs)


def rand_index(counts, n_orig):
    """``(TS + TD) / binom(n_orig, 2)``."""
    if n_orig < 2:
        raise DataError("the Rand index needs at least 2 samples")
    return float(Fraction(counts.TS + counts.TD, _comb2(n_orig)))


@lru_cache(maxsize=None)
def stirling2(n, k):
    """Exact Stirling number of the second kind ``S(n, k)``."""
    if n < 0 or k < 0:
        raise ValueError("n and k must be non-negative")
    if k > n:
        return 0
    row = [1] + [0] * k
    for m in range(1, n + 1):
        for j in range(min(m, k), 0, -1):
            row[j] = j * row[j] + row[j - 1]
        row[0] = 0
    return row[k]


def stirling_ratio_exact(n_orig, C):
    """``S(n_orig - 1, C) / S(n_orig, C)`` with big integers."""
    if not 1 <= C <= n_orig:
        raise DataError(f"need 1 <= C <= n_orig, got C={C}, n_orig={n_orig}")
    return float(Fraction(stirling2(n_orig - 1, C), stirling2(n_orig, C)))


def stirling_ratio(n_orig, C):
    """``S(n_orig - 1, C) / S(n_orig, C)`` in floating point.

    Runs the recurrence ``S(n, k) = k S(n-1, k) + S(n-1, k-1)`` row by row,
    rescaling each row by its maximum so nothing overflows. The ratio only
    needs the last two rows, and rescaling row ``n - 1`` does not change it.
    """
    if not 1 <= C <= n_orig:
        raise DataError(f"need 1 <= C <= n_orig, got C={C}, n_orig={n_orig}")
    k = np.arange(C + 1, dtype=float)
    row = np.zeros(C + 1)
    row[0] = 1.0
    prev_c = 0.0
    for _ in range(n_orig):
        new = k * row
        new[1:] += row[:-1]
        new[0] = 0.0
        prev_c = row[C]
        row = new / new.max()
        last_c = new[C]
    # prev_c and last_c are on the same scale (that of the normalised row n-1)
    return float(prev_c / last_c)


def ari_fnc(reference, obtained, n_clusters=None):
    """ARI_fnc of ``obtained`` against ``reference``.

    Parameters
    ----------
    reference, obtained : array-like of shape (n_orig,) or Partition
        Cluster labels. ``reference`` must be the true partition.
    n_clusters : int, optional
        Fixed cluster count ``C``; defaults to the number of distinct labels
        in ``obtained``. Passing it checks that ``obtained`` really has ``C``
        clusters.

    Raises
    ------
    NumericalError
        If ``E[RI] == 1`` and the score is undefined.
    """
    ref, obt = _labels(reference), _labels(obtained)
    counts = pair_counts(ref, obt)
    n = ref.size
    c_obt = np.unique(obt).size
    if n_clusters is None:
        n_clusters = c_obt
    elif c_obt != n_clusters:
        raise DataError(f"obtained partition has {c_obt} clusters, expected {n_clusters}")
    if not 1 <= n_clusters <= n:
        raise DataError(f"need 1 <= C <= n_orig, got C={n_clusters}, n_orig={n}")
    # everything below is exact rational arithmetic rounded once at the end;
    # U is exact up to EXACT_STIRLING_MAX and the normalised recurrence beyond
    if n <= EXACT_STIRLING_MAX:
        u = Fraction(stirling2(n - 1, n_clusters), stirling2(n, n_clusters))
    else:
        u = Fraction(stirling_ratio(n, n_clusters))
    pairs = _comb2(n)
    ri = Fraction(counts.TS + counts.TD, pairs)
    v = Fraction(counts.TS + counts.FD, pairs)
    expected = u * v + (1 - u) * (1 - v)
    if expected == 1:
        raise NumericalError("expected Rand index is 1; ARI_fnc is undefined")
    score = (ri - expected) / (1 - expected)
    return AriReport(
        ri=float(ri), expected_ri=float(expected), u=float(u), v=float(v), ari_fnc=float(score), counts=counts
    )


def ari_fnc_score(labels_true, labels_pred):
    """Scalar ARI_fnc in the ``metric(labels_true, labels_pred)`` calling style."""
    return ari_fnc(labels_true, labels_pred).ari_fnc
