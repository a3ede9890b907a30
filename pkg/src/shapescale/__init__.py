"""Feature scaling for clustering driven by shape complexity.

Typical use::

    from shapescale import ShapeComplexityScaler, FixedCountKMeans
    scaler = ShapeComplexityScaler(n_trials=200).fit(X, y)
    labels = FixedCountKMeans(n_clusters=3).fit(scaler.transform(X)).labels_
"""

__version__ = "0.1.0"

from .ari import ari_fnc, ari_fnc_score, pair_counts, stirling_ratio
from .complexity import pair_table_from_matrix, sc_gradient, sc_value
from .estimators import FixedCountKMeans, ShapeComplexityScaler
from .exceptions import DataError, NumericalError, ShapeScaleError
from .ingest import Dataset, load_csv
from .kmeans import KMeansConfig, kmeans
from .problem import TrialConfig, objective, run_trials, solve_local

__all__ = [
    "ShapeComplexityScaler",
    "FixedCountKMeans",
    "Dataset",
    "load_csv",
    "pair_table_from_matrix",
    "sc_value",
    "sc_gradient",
    "TrialConfig",
    "objective",
    "solve_local",
    "run_trials",
    "KMeansConfig",
    "kmeans",
    "ari_fnc",
    "ari_fnc_score",
    "pair_counts",
    "stirling_ratio",
    "ShapeScaleError",
    "DataError",
    "NumericalError",
]
