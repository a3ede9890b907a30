import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from shapescale.estimators import FixedCountKMeans, ShapeComplexityScaler, unique_rows
from shapescale.exceptions import DataError


@pytest.fixture(scope="module")
def blobs():
    rng = np.random.default_rng(8)
    X = np.vstack([rng.normal(0, 1, size=(20, 3)), rng.normal(0, 1, size=(20, 3)) + [6, 0, 0]])
    X[:, 1] *= 40.0
    y = np.repeat([0, 1], 20)
    return X, y


def test_unique_rows():
    X = np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0], [3.0, 3.0]])
    assert unique_rows(X).tolist() == [0, 1, 3]


def test_scaler_min_objective(blobs):
    X, _ = blobs
    sc = ShapeComplexityScaler(n_trials=3, random_state=2).fit(X)
    assert sc.alpha_.shape == (3,)
    assert np.sum(sc.alpha_**2) == pytest.approx(3.0, abs=1e-8)
    assert np.allclose(sc.transform(X), X * sc.alpha_ / sc.sigma_)
    assert sc.n_unique_ == 40
    best = min(sc.trials_.usable, key=lambda r: (r.objective, r.index))
    assert sc.best_index_ == best.index


def test_scaler_best_ari(blobs):
    X, y = blobs
    sc = ShapeComplexityScaler(n_trials=3, kmeans_restarts=3).fit(X, y)
    assert set(sc.trial_scores_) == {r.index for r in sc.trials_.usable}
    assert sc.trial_scores_[sc.best_index_] == max(sc.trial_scores_.values())


def test_params_and_clone():
    sc = ShapeComplexityScaler(n_trials=5, variant="all_pairs")
    assert sc.get_params()["variant"] == "all_pairs"
    c = clone(sc).set_params(n_trials=2)
    assert c.n_trials == 2 and sc.n_trials == 5


def test_pipeline(blobs):
    X, y = blobs
    pipe = make_pipeline(ShapeComplexityScaler(n_trials=2, kmeans_restarts=2),
                         FixedCountKMeans(n_clusters=2, restarts=3))
    labels = pipe.fit(X, y).predict(X)
    assert labels.shape == (40,)


def test_kmeans_estimator(blobs):
    X, _ = blobs
    km = FixedCountKMeans(n_clusters=2, restarts=4).fit(X)
    assert km.cluster_centers_.shape == (2, 3)
    assert np.array_equal(km.predict(X), km.labels_)
    assert km.inertia_ > 0
    assert np.array_equal(km.fit_predict(X), km.labels_)


def test_validation(blobs):
    X, y = blobs
    with pytest.raises(ValueError):
        ShapeComplexityScaler(selection="best_ari").fit(X)
    with pytest.raises(ValueError):
        ShapeComplexityScaler(selection="nope").fit(X)
    with pytest.raises(DataError):
        ShapeComplexityScaler(n_trials=1).fit(np.column_stack([np.ones(5), np.arange(5.0)]))
    sc = ShapeComplexityScaler(n_trials=1).fit(X)
    with pytest.raises(ValueError):
        sc.transform(X[:, :2])
