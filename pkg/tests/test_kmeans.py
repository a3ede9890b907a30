import itertools

import numpy as np
import pytest

from shapescale.ari import ari_fnc
from shapescale.exceptions import DataError
from shapescale.ingest import ScalingScheme, apply_scaling, column_sigmas
from shapescale.kmeans import KMeansConfig, canonical_labels, kmeans


def best_two_partition(X):
    best = None
    n = len(X)
    for mask in itertools.product([0, 1], repeat=n):
        if len(set(mask)) < 2:
            continue
        lab = np.array(mask)
        ss = sum(((X[lab == c] - X[lab == c].mean(axis=0)) ** 2).sum() for c in (0, 1))
        if best is None or ss < best[0] - 1e-15:
            best = (ss, canonical_labels(lab))
    return best


def test_two_pairs_exhaustive():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]])
    part = kmeans(X, 2)
    ss, labels = best_two_partition(X)
    assert part.labels.tolist() == labels.tolist() == [0, 0, 1, 1]
    assert part.within_ss == pytest.approx(0.01, rel=1e-12)
    assert part.within_ss == pytest.approx(ss, rel=1e-12)


def test_random_small_matches_exhaustive(rng):
    for _ in range(5):
        X = rng.normal(size=(8, 2))
        X[:4] += 3
        assert kmeans(X, 2, KMeansConfig(restarts=20)).within_ss == pytest.approx(best_two_partition(X)[0], rel=1e-9)


def test_singletons():
    X = np.array([[0.0], [1.0], [5.0], [1.0]])
    part = kmeans(X, 3)
    assert part.within_ss == 0.0
    assert len(set(part.labels)) == 3


def test_errors():
    with pytest.raises(DataError):
        kmeans(np.ones((4, 2)), 2)
    with pytest.raises(DataError):
        kmeans(np.eye(3), 1)
    with pytest.raises(DataError):
        kmeans(np.array([[np.nan, 1.0], [0.0, 1.0]]), 2)
    with pytest.raises(ValueError):
        KMeansConfig(restarts=0)


def test_best_of_restarts(rng):
    X = rng.normal(size=(60, 3))
    best = kmeans(X, 4, KMeansConfig(restarts=8, seed=5))
    for r in range(8):
        single = kmeans(X, 4, KMeansConfig(restarts=1, seed=5))
        assert best.within_ss <= single.within_ss
    assert best.restart < 8


def test_scale_equivariance(rng):
    X = rng.normal(size=(40, 2))
    a = kmeans(X, 3, KMeansConfig(restarts=5))
    b = kmeans(X * 7.5, 3, KMeansConfig(restarts=5))
    assert np.array_equal(a.labels, b.labels)
    assert b.within_ss == pytest.approx(a.within_ss * 7.5**2, rel=1e-10)


def test_descent_and_canonical(rng):
    X = rng.normal(size=(80, 2))
    part = kmeans(X, 5, KMeansConfig(restarts=4), check_descent=True)
    first = [part.labels.tolist().index(c) for c in range(5)]
    assert first == sorted(first)
    assert len(part) == 80
    assert canonical_labels(["z", "a", "z", "q"]).tolist() == [0, 1, 0, 2]


def test_iris_reference_values(iris):
    y = iris.label_codes()
    raw = kmeans(iris.values, 3)
    assert ari_fnc(y, raw).ari_fnc == pytest.approx(0.728, abs=0.02)
    scaled = apply_scaling(iris, column_sigmas(iris), ScalingScheme("inv_sigma")).values
    assert ari_fnc(y, kmeans(scaled, 3)).ari_fnc == pytest.approx(0.621, abs=0.03)
