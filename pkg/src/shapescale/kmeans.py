"""Lloyd's k-means with k-means++ seeding and independent restarts."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError

__all__ = ["Partition", "KMeansConfig", "kmeans", "canonical_labels"]


@dataclass(frozen=True, eq=False)
class Partition:
    """Cluster labels ``0..C-1`` (first-occurrence order) and total within-cluster SS."""

    labels: np.ndarray
    C: int
    within_ss: float
    restart: int = 0
    iterations: int = 0

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 50
    max_lloyd_iterations: int = 300
    seed: int = 1234
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_lloyd_iterations < 1:
            raise ValueError("max_lloyd_iterations must be >= 1")


def canonical_labels(labels):
    """Renumber clusters in order of first appearance."""
    labels = np.asarray(labels)
    mapping = {}
    return np.array([mapping.setdefault(lab, len(mapping)) for lab in labels.tolist()], dtype=np.int64)


def _sq_dist(X, centers):
    diff = X[:, None, :] - centers[None, :, :]
    return (diff * diff).sum(axis=2)


def _plusplus(X, C, rng):
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    closest = _sq_dist(X, X[idx]).min(axis=1)
    for _ in range(1, C):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a chosen centre; pick any unchosen row
            pick = int(rng.integers(n))
        else:
            cum = np.cumsum(closest)
            pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            pick = min(pick, n - 1)
        idx.append(pick)
        closest = np.minimum(closest, _sq_dist(X, X[pick:pick + 1])[:, 0])
    return X[idx].copy()


def _repair_empty(X, labels, centers, d2, C):
    counts = np.bincount(labels, minlength=C)
    for c in np.flatnonzero(counts == 0):
        own = d2[np.arange(len(X)), labels]
        # only donate from clusters that keep at least one member
        donors = counts[labels] > 1
        if not donors.any():
            break
        far = int(np.argmax(np.where(donors, own, -1.0)))
        counts[labels[far]] -= 1
        labels[far] = c
        counts[c] = 1
        centers[c] = X[far]
        d2[far] = _sq_dist(X[far:far + 1], centers)[0]
    return labels


def _lloyd(X, C, rng, max_iter, tol, check_descent=False):
    centers = _plusplus(X, C, rng)
    prev_ss = np.inf
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dist(X, centers)
        new_labels = np.argmin(d2, axis=1)
        new_labels = _repair_empty(X, new_labels, centers, d2, C)
        for c in range(C):
            centers[c] = X[new_labels == c].mean(axis=0)
        ss = float(((X - centers[new_labels]) ** 2).sum())
        history.append(ss)
        if check_descent and len(history) > 1:
            assert history[-1] <= history[-2] * (1 + 1e-12) + 1e-300, "within_ss increased"
        unchanged = labels is not None and np.array_equal(labels, new_labels)
        labels = new_labels
        if unchanged or (np.isfinite(prev_ss) and prev_ss - ss <= tol * prev_ss):
            break
        prev_ss = ss
    return labels, ss, it, history


def kmeans(X, C, config=KMeansConfig(), check_descent=False):
    """Partition the rows of ``X`` into ``C`` clusters.

    Runs ``config.restarts`` independent restarts, restart ``r`` seeded from
    ``(config.seed, r)``, and keeps the lowest within-cluster sum of squares
    (ties go to the lower restart index). Labels are renumbered by first
    occurrence.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
    C : int
        Number of clusters, at least 2 and at most the number of distinct rows.
    config : KMeansConfig
    check_descent : bool, default=False
        Assert that within-cluster SS never increases between Lloyd steps.

    Returns
    -------
    Partition
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise DataError("k-means input must be a finite 2-d matrix")
    if C < 2:
        raise DataError(f"need at least 2 clusters, got {C}")
    distinct = len(np.unique(X, axis=0))
    if C > distinct:
        raise DataError(f"{C} clusters requested but only {distinct} distinct rows")
    best = None
    for r in range(config.restarts):
        rng = np.random.default_rng([config.seed, r])
        labels, ss, it, _ = _lloyd(X, C, rng, config.max_lloyd_iterations, config.tolerance, check_descent)
        if best is None or ss < best[1]:
            best = (labels, ss, r, it)
    labels, ss, r, it = best
    return Partition(labels=canonical_labels(labels), C=C, within_ss=ss, restart=r, iterations=it)
