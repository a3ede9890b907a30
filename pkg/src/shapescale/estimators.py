"""scikit-learn compatible wrappers.

:class:`ShapeComplexityScaler` learns per-column factors ``alpha / sigma``
from a batch of local solves and rescales data with them;
:class:`FixedCountKMeans` exposes the package's k-means as a clusterer.
Both follow the usual ``fit``/``transform``/``predict`` and
``get_params``/``set_params`` conventions so they drop into pipelines.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ari import ari_fnc
from .complexity import ALPHA_FLOOR, pair_table_from_matrix
from .exceptions import DataError
from .kmeans import KMeansConfig, kmeans
from .problem import TrialConfig, clustering_alpha, run_trials

__all__ = ["ShapeComplexityScaler", "FixedCountKMeans", "unique_rows"]


def unique_rows(X):
    """Indices of the first occurrence of every distinct row, in row order."""
    seen = {}
    for i, row in enumerate(np.ascontiguousarray(X)):
        seen.setdefault(row.tobytes(), i)
    return np.array(sorted(seen.values()))


def _sigmas(X):
    sigma = X.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(sigma > 0))
    if bad.size:
        raise DataError(f"column(s) {bad.tolist()} are constant (sigma = 0)")
    return sigma


class ShapeComplexityScaler(TransformerMixin, BaseEstimator):
    """Scale features by ``alpha_k / sigma_k`` with ``alpha`` found by shape complexity.

    ``fit`` computes column standard deviations over all rows, drops
    duplicate rows, runs ``n_trials`` local solves from random starts and
    keeps one candidate ``alpha``.

    Parameters
    ----------
    n_trials : int, default=200
        Number of random starts.
    variant : {"pair_one_two", "all_pairs", "maximize_sc"}, default="pair_one_two"
    selection : {"auto", "best_ari", "min_objective"}, default="auto"
        How the kept candidate is chosen among converged trials. ``best_ari``
        clusters the data with each candidate and keeps the highest ARI_fnc
        against ``y`` (required). ``min_objective`` keeps the lowest objective.
        ``auto`` is ``best_ari`` when ``y`` is given, else ``min_objective``.
    n_clusters : int, optional
        Cluster count for ``best_ari``; defaults to the number of classes in ``y``.
    kmeans_restarts : int, default=50
    max_iter : int, default=5000
        Iteration cap per trial.
    alpha_floor : float, default=1e-5
    random_state : int, default=0
        Master seed; trial ``t`` uses a stream derived from ``(random_state, t)``.
    n_jobs : int, default=1
        Threads for running trials. Results do not depend on it.

    Attributes
    ----------
    sigma_ : ndarray of shape (n_features,)
    alpha_ : ndarray of shape (n_features,)
        Factors of the kept trial; for ``maximize_sc`` divided by their maximum.
    scale_ : ndarray of shape (n_features,)
        ``alpha_ / sigma_``.
    trials_ : TrialSet
    trial_scores_ : dict
        ARI_fnc per converged trial index (``best_ari`` only).
    best_index_ : int
    n_unique_ : int
    n_features_in_ : int
    """

    def __init__(
        self,
        n_trials=200,
        variant="pair_one_two",
        selection="auto",
        n_clusters=None,
        kmeans_restarts=50,
        max_iter=5000,
        alpha_floor=ALPHA_FLOOR,
        random_state=0,
        n_jobs=1,
    ):
        self.n_trials = n_trials
        self.variant = variant
        self.selection = selection
        self.n_clusters = n_clusters
        self.kmeans_restarts = kmeans_restarts
        self.max_iter = max_iter
        self.alpha_floor = alpha_floor
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=2, ensure_min_features=2)
        self.n_features_in_ = X.shape[1]
        selection = self.selection
        if selection == "auto":
            selection = "best_ari" if y is not None else "min_objective"
        if selection not in ("best_ari", "min_objective"):
            raise ValueError(f"unknown selection {self.selection!r}")
        if selection == "best_ari" and y is None:
            raise ValueError("selection='best_ari' needs reference labels y")

        self.sigma_ = _sigmas(X)
        keep = unique_rows(X)
        if keep.size < 2:
            raise DataError("need at least 2 distinct rows")
        self.n_unique_ = int(keep.size)
        table = pair_table_from_matrix(X[keep] / self.sigma_, n_orig=X.shape[0])
        config = TrialConfig(seed=self.random_state, max_iterations=self.max_iter, alpha_floor=self.alpha_floor)
        self.trials_ = run_trials(table, self.n_trials, config, self.variant, n_jobs=self.n_jobs)
        candidates = self.trials_.usable

        self.trial_scores_ = {}
        if selection == "best_ari":
            y = np.asarray(y)
            if y.shape[0] != X.shape[0]:
                raise ValueError(f"y has {y.shape[0]} entries for {X.shape[0]} rows")
            C = self.n_clusters or np.unique(y).size
            cfg = KMeansConfig(restarts=self.kmeans_restarts, seed=self.random_state)
            for r in candidates:
                scaled = X * (clustering_alpha(r.final_alpha, self.variant) / self.sigma_)
                self.trial_scores_[r.index] = ari_fnc(y, kmeans(scaled, C, cfg)).ari_fnc
            # max score, ties to the lowest trial index
            best = max(candidates, key=lambda r: (self.trial_scores_[r.index], -r.index))
        else:
            best = min(candidates, key=lambda r: (r.objective, r.index))
        self.best_index_ = best.index
        self.alpha_ = clustering_alpha(best.final_alpha, self.variant)
        self.scale_ = self.alpha_ / self.sigma_
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X * self.scale_


class FixedCountKMeans(ClusterMixin, BaseEstimator):
    """k-means with a fixed number of clusters, k-means++ seeding and restarts.

    Parameters
    ----------
    n_clusters : int, default=2
    restarts : int, default=50
    max_iter : int, default=300
    tol : float, default=1e-10
        Relative change in within-cluster SS that ends a restart.
    random_state : int, default=1234

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
    inertia_ : float
        Within-cluster sum of squares of the best restart.
    """

    def __init__(self, n_clusters=2, restarts=50, max_iter=300, tol=1e-10, random_state=1234):
        self.n_clusters = n_clusters
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        cfg = KMeansConfig(
            restarts=self.restarts, max_lloyd_iterations=self.max_iter, seed=self.random_state, tolerance=self.tol
        )
        part = kmeans(X, self.n_clusters, cfg)
        self.labels_ = part.labels
        self.inertia_ = part.within_ss
        self.cluster_centers_ = np.array([X[part.labels == c].mean(axis=0) for c in range(part.C)])
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=float)
        diff = X[:, None, :] - self.cluster_centers_[None, :, :]
        return np.argmin((diff * diff).sum(axis=2), axis=1)
