"""Tabular ingestion and preprocessing.

Loads a CSV into an immutable :class:`Dataset`, fills missing cells with
column means, removes exact duplicate rows, computes per-dimension standard
deviations, optionally projects onto leading principal components and
applies one of the supported scaling schemes.
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import DataError

__all__ = [
    "Dataset",
    "UniqueView",
    "ScalingScheme",
    "load_csv",
    "write_csv",
    "impute_mean",
    "deduplicate",
    "column_sigmas",
    "pca_reduce",
    "apply_scaling",
    "format_real",
]

DEFAULT_MISSING = ("", "?")
SCHEMES = ("none", "inv_sigma", "alpha_over_sigma")


def format_real(x):
    """Shortest round-trip form is not required; 17 significant digits is."""
    return format(float(x), ".17g")


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n_orig x d`` real matrix with column names and optional labels.

    Missing cells are stored as NaN until :func:`impute_mean` fills them.
    """

    values: np.ndarray
    column_names: tuple
    reference_labels: tuple = None
    provenance: str = ""

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DataError("values must be a 2-d matrix")
        n_orig, d = values.shape
        # d == 1 only arises from pca_reduce(m=1); loaders insist on d > 1
        if n_orig < 2 or d < 1:
            raise DataError(f"need at least 2 rows and 1 column, got {n_orig}x{d}")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != d:
            raise DataError(f"{len(names)} column names for {d} columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)
        if self.reference_labels is not None:
            labels = tuple(self.reference_labels)
            if len(labels) != n_orig:
                raise DataError(f"{len(labels)} labels for {n_orig} rows")
            object.__setattr__(self, "reference_labels", labels)

    @property
    def n_orig(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def has_missing(self):
        return bool(np.isnan(self.values).any())

    def label_codes(self):
        """Reference labels as integer codes in first-occurrence order."""
        if self.reference_labels is None:
            raise DataError("dataset has no reference labels")
        codes = {}
        return np.array([codes.setdefault(lab, len(codes)) for lab in self.reference_labels])

    def with_values(self, values, column_names=None, provenance=None):
        return replace(
            self,
            values=values,
            column_names=self.column_names if column_names is None else column_names,
            provenance=self.provenance if provenance is None else provenance,
        )


@dataclass(frozen=True)
class UniqueView:
    """Row indices of the first occurrence of every distinct row."""

    indices: tuple

    @property
    def n(self):
        return len(self.indices)


@dataclass(frozen=True)
class ScalingScheme:
    """``none``, ``inv_sigma`` (``X/sigma``) or ``alpha_over_sigma`` (``alpha*X/sigma``)."""

    kind: str = "none"
    alpha: tuple = field(default=None)

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scaling scheme {self.kind!r}; expected one of {SCHEMES}")
        if (self.kind == "alpha_over_sigma") != (self.alpha is not None):
            raise ValueError("alpha is required by, and only by, alpha_over_sigma")
        if self.alpha is not None:
            object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))


def _resolve_label_column(header, label_column, width):
    if label_column is None:
        return None
    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.lstrip("-").isdigit()):
        idx = int(label_column)
        if idx < 0:
            idx += width
        if not 0 <= idx < width:
            raise DataError(f"label column index {label_column} out of range for {width} fields")
        return idx
    if header is None:
        raise DataError(f"label column {label_column!r} given by name but the file has no header")
    try:
        return header.index(label_column)
    except ValueError:
        raise DataError(f"label column {label_column!r} not found in header {header}") from None


def load_csv(path, delimiter=",", header=True, label_column=None, missing=DEFAULT_MISSING):
    """Read a delimited text file into a :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
    delimiter : str, default=","
    header : bool, default=True
        Whether the first row holds column names.
    label_column : str or int, optional
        Column holding reference cluster labels, by name or 0-based index
        (negative indices count from the end).
    missing : iterable of str, default=("", "?")
        Tokens that mark a missing feature cell.

    Raises
    ------
    DataError
        On ragged rows, non-numeric feature cells or too few rows/columns.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    missing = {m.strip() for m in missing}
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh, delimiter=delimiter), start=1) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    names = None
    if header:
        names = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(rows)}")
    width = len(names) if names is not None else len(rows[0][1])
    for lineno, r in rows:
        if len(r) != width:
            raise DataError(f"{path}: row {lineno} has {len(r)} fields, expected {width}")
    label_idx = _resolve_label_column(names, label_column, width)
    feature_idx = [k for k in range(width) if k != label_idx]
    if len(feature_idx) < 2:
        raise DataError(f"{path}: need at least 2 feature columns, got {len(feature_idx)}")
    values = np.empty((len(rows), len(feature_idx)))
    for i, (lineno, r) in enumerate(rows):
        for j, k in enumerate(feature_idx):
            cell = r[k].strip()
            if cell in missing:
                values[i, j] = np.nan
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {lineno}, column {k + 1}: non-numeric value {cell!r}") from None
            if not np.isfinite(values[i, j]):
                raise DataError(f"{path}: row {lineno}, column {k + 1}: non-finite value {cell!r}")
    if names is None:
        names = [f"x{k + 1}" for k in range(width)]
    labels = None if label_idx is None else [r[label_idx].strip() for _, r in rows]
    return Dataset(
        values=values,
        column_names=[names[k] for k in feature_idx],
        reference_labels=labels,
        provenance=str(path),
    )


def write_csv(data, path, delimiter=",", label_name="label"):
    """Write ``data`` with a header row; reals use 17 significant digits.

    Missing cells are written as empty fields, so :func:`load_csv` reads the
    file back to an identical dataset.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        head = list(data.column_names)
        if data.reference_labels is not None:
            head.append(label_name)
        w.writerow(head)
        for i, row in enumerate(data.values):
            out = ["" if np.isnan(v) else format_real(v) for v in row]
            if data.reference_labels is not None:
                out.append(data.reference_labels[i])
            w.writerow(out)


def impute_mean(data):
    """Replace every missing cell with the mean of its column's present values."""
    values = np.array(data.values)
    absent = np.isnan(values)
    if not absent.any():
        return data
    for k in np.flatnonzero(absent.any(axis=0)):
        present = values[~absent[:, k], k]
        if present.size == 0:
            raise DataError(f"column {data.column_names[k]!r} has no present values")
        values[absent[:, k], k] = present.mean()
    return data.with_values(values)


def deduplicate(data):
    """Keep the first occurrence of each distinct row (exact equality)."""
    if data.has_missing:
        raise DataError("impute missing values before deduplicating")
    seen = set()
    keep = []
    for i, row in enumerate(data.values):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    if len(keep) < 2:
        raise DataError(f"only {len(keep)} distinct row(s); shape complexity needs at least 2")
    return UniqueView(indices=tuple(keep))


def column_sigmas(data):
    """Per-column sample standard deviation (divisor ``n_orig - 1``) over all rows.

    Raises
    ------
    DataError
        If a column is constant.
    """
    if data.has_missing:
        raise DataError("impute missing values before computing sigmas")
    sigma = data.values.std(axis=0, ddof=1)
    for k in np.flatnonzero(~(sigma > 0)):
        raise DataError(f"column {data.column_names[k]!r} is constant (sigma = 0)")
    return _frozen(sigma)


def pca_reduce(data, m):
    """Project the column-centred data onto its top ``m`` principal components.

    Columns are centred but not scaled. Each component's sign is fixed so
    that its largest-magnitude loading is positive.

    Returns
    -------
    reduced : Dataset
        Columns ``PC1..PCm``.
    variance_retained : float
        Sum of the top ``m`` covariance eigenvalues over their total.
    """
    d = data.d
    if not 1 <= m <= d:
        raise DataError(f"PCA target dimension must be in 1..{d}, got {m}")
    if data.has_missing:
        raise DataError("impute missing values before PCA")
    centred = data.values - data.values.mean(axis=0)
    cov = centred.T @ centred / (data.n_orig - 1)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval)[::-1]
    eigval = np.clip(eigval[order], 0.0, None)
    eigvec = eigvec[:, order]
    lead = np.argmax(np.abs(eigvec), axis=0)
    signs = np.sign(eigvec[lead, np.arange(d)])
    signs[signs == 0] = 1.0
    eigvec = eigvec * signs
    retained = float(eigval[:m].sum() / eigval.sum())
    projected = centred @ eigvec[:, :m]
    names = [f"PC{k + 1}" for k in range(m)]
    return data.with_values(projected, names, f"{data.provenance} [PCA m={m}]"), retained


def apply_scaling(data, sigmas, scheme):
    """Scale columns: unchanged, ``X/sigma`` or ``alpha*X/sigma``."""
    if scheme.kind == "none":
        return data
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.shape != (data.d,):
        raise DataError(f"{sigmas.size} sigmas for {data.d} columns")
    factors = 1.0 / sigmas
    if scheme.kind == "alpha_over_sigma":
        alpha = np.asarray(scheme.alpha)
        if alpha.shape != (data.d,):
            raise DataError(f"{alpha.size} scaling factors for {data.d} columns")
        factors = alpha * factors
    return data.with_values(data.values * factors)
