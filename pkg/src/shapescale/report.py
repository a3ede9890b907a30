"""End-to-end pipeline and report files.

ingest -> impute -> optional PCA -> sigmas -> deduplicate -> trial batch ->
k-means under each scaling scheme -> ARI_fnc, plus distance histograms and
per-trial scatter data. Every file is written once, after all results are
in, so reruns with the same seeds produce byte-identical output.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .ari import ari_fnc
from .complexity import ALPHA_FLOOR, pair_table
from .exceptions import DataError
from .ingest import (
    DEFAULT_MISSING,
    ScalingScheme,
    apply_scaling,
    column_sigmas,
    deduplicate,
    format_real,
    impute_mean,
    load_csv,
    pca_reduce,
)
from .kmeans import KMeansConfig, kmeans
from .problem import TrialConfig, clustering_alpha, run_trials, write_trial_stream

__all__ = [
    "PipelineConfig",
    "Prepared",
    "ReportBundle",
    "prepare",
    "cluster_with",
    "run_pipeline",
    "write_bundle",
    "distance_histogram",
    "compare",
    "render_compare",
    "write_compare_csv",
    "write_rows",
]

KMEANS_NOTE = "k-means: Lloyd iterations with k-means++ seeding, best of {restarts} restarts (seed {seed})"
IMPUTE_NOTE = "missing values: {cells} cell(s) in {cols} column(s) replaced by column means"


@dataclass
class PipelineConfig:
    """Every knob of a pipeline run. Field names double as CLI flags and config-file keys."""

    input: str = None
    name: str = None
    delimiter: str = ","
    header: bool = True
    label_column: str = None
    missing: tuple = DEFAULT_MISSING
    impute: bool = True
    pca: int = None
    trials: int = 200
    seed: int = 0
    variant: str = "pair_one_two"
    max_iterations: int = 5000
    alpha_floor: float = ALPHA_FLOOR
    init_low: float = None
    init_high: float = None
    objective_tolerance: float = 1e-12
    step_tolerance: float = 1e-9
    kmeans_restarts: int = 50
    kmeans_seed: int = 1234
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-10
    clusters: int = None
    bins: int = 50
    n_jobs: int = 1
    output_dir: str = None

    def trial_config(self):
        return TrialConfig(
            seed=self.seed,
            init_low=self.init_low,
            init_high=self.init_high,
            max_iterations=self.max_iterations,
            alpha_floor=self.alpha_floor,
            objective_tolerance=self.objective_tolerance,
            step_tolerance=self.step_tolerance,
        )

    def kmeans_config(self):
        return KMeansConfig(
            restarts=self.kmeans_restarts,
            max_lloyd_iterations=self.kmeans_max_iter,
            seed=self.kmeans_seed,
            tolerance=self.kmeans_tol,
        )

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}


@dataclass
class Prepared:
    data: object
    sigmas: np.ndarray
    view: object
    table: object
    variance_retained: float = None
    imputed_cells: int = 0
    imputed_columns: int = 0

    @property
    def reference(self):
        return self.data.label_codes()


@dataclass
class ReportBundle:
    dataset: dict
    summary: dict
    best_trial: dict
    trials: object
    trial_ari: dict
    labels: dict
    histograms: dict
    scatter: list
    notes: list = field(default_factory=list)


def prepare(config):
    """Load, impute, reduce, and build the pair table for ``config.input``."""
    if config.input is None:
        raise DataError("no input file given")
    data = load_csv(
        config.input,
        delimiter=config.delimiter,
        header=config.header,
        label_column=config.label_column,
        missing=config.missing,
    )
    absent = np.isnan(data.values)
    cells, cols = int(absent.sum()), int(absent.any(axis=0).sum())
    if cells:
        if not config.impute:
            raise DataError(f"{cells} missing cell(s) and imputation is disabled")
        data = impute_mean(data)
    retained = None
    if config.pca is not None:
        data, retained = pca_reduce(data, config.pca)
    sigmas = column_sigmas(data)
    view = deduplicate(data)
    table = pair_table(view, data, sigmas)
    return Prepared(data, sigmas, view, table, retained, cells, cols)


def cluster_with(prep, scheme, C, kcfg):
    """k-means on the full (duplicates included) matrix scaled by ``scheme``."""
    scaled = apply_scaling(prep.data, prep.sigmas, scheme)
    return kmeans(scaled.values, C, kcfg)


def distance_histogram(matrix, bins=50):
    """Equal-width histogram of all pairwise distances over ``[0, max r]``.

    Returns
    -------
    edges : ndarray of shape (bins + 1,)
    counts : ndarray of shape (bins,)
        Sums to the number of row pairs.
    """
    if bins < 1:
        raise DataError(f"need at least one bin, got {bins}")
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("need a matrix with at least 2 rows")
    r = pdist(X)
    top = float(r.max())
    if top == 0.0:
        top = 1.0
    edges = np.linspace(0.0, top, bins + 1)
    # searchsorted keeps the largest distance in the last bin
    idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return edges, counts


def _interval(values):
    if not values:
        return None, None
    return min(values), max(values)


def run_pipeline(config, prep=None):
    """Run the full pipeline and return a :class:`ReportBundle` (nothing is written)."""
    prep = prep or prepare(config)
    data = prep.data
    if data.reference_labels is None:
        raise DataError("the pipeline needs reference labels (--label-column); use `cluster` to only partition")
    y = prep.reference
    C = config.clusters or int(np.unique(y).size)
    kcfg = config.kmeans_config()

    labels = {"reference": y}
    aris = {}
    for kind in ("none", "inv_sigma"):
        part = cluster_with(prep, ScalingScheme(kind), C, kcfg)
        labels[kind] = part.labels
        aris[kind] = ari_fnc(y, part, C).ari_fnc

    # an all-discarded batch still yields a report, with the interval unavailable
    batch = run_trials(
        prep.table, config.trials, config.trial_config(), config.variant, n_jobs=config.n_jobs, require_usable=False
    )
    usable = batch.usable
    trial_ari = {}
    for r in usable:
        scheme = ScalingScheme("alpha_over_sigma", clustering_alpha(r.final_alpha, config.variant))
        part = cluster_with(prep, scheme, C, kcfg)
        labels[f"trial_{r.index:04d}"] = part.labels
        trial_ari[r.index] = ari_fnc(y, part, C).ari_fnc
    lo, hi = _interval(list(trial_ari.values()))

    best = None
    if trial_ari:
        best = max(usable, key=lambda r: (trial_ari[r.index], -r.index))

    inv_sigma = 1.0 / prep.sigmas
    best_info = None
    if best is not None:
        alpha = np.array(best.final_alpha)
        best_info = {
            "index": best.index,
            "ari_fnc": trial_ari[best.index],
            "alpha": alpha.tolist(),
            "alpha_over_sigma": (alpha * inv_sigma).tolist(),
            "inv_sigma": inv_sigma.tolist(),
            "objective": best.objective,
            "sc": best.sc,
            "iterations": best.iterations,
        }

    histograms = {}
    for kind in ("none", "inv_sigma"):
        histograms[kind] = distance_histogram(apply_scaling(data, prep.sigmas, ScalingScheme(kind)).values, config.bins)
    if best is not None:
        scheme = ScalingScheme("alpha_over_sigma", clustering_alpha(best.final_alpha, config.variant))
        histograms["alpha_over_sigma"] = distance_histogram(apply_scaling(data, prep.sigmas, scheme).values, config.bins)

    scatter = [
        {
            "index": r.index,
            "alpha1": r.final_alpha[0],
            "sc": r.sc,
            "ari_fnc": trial_ari.get(r.index, math.nan),
            "converged": r.converged,
        }
        for r in batch.results
    ]

    min_dist = float(np.sqrt(prep.table.materialize().sum(axis=1).min()))
    notes = [KMEANS_NOTE.format(restarts=kcfg.restarts, seed=kcfg.seed)]
    if not usable:
        reasons = sorted({r.message for r in batch.results})
        notes.append(f"all {len(batch.results)} trials discarded: {'; '.join(reasons)}")
    if prep.imputed_cells:
        notes.append(IMPUTE_NOTE.format(cells=prep.imputed_cells, cols=prep.imputed_columns))
    dataset = {
        "name": config.name or Path(config.input).stem,
        "input": str(config.input),
        "n_orig": data.n_orig,
        "n_unique": prep.view.n,
        "d": data.d,
        "columns": list(data.column_names),
        "clusters": C,
        "variance_retained": prep.variance_retained,
        "min_pair_distance_inv_sigma": min_dist,
    }
    summary = {
        "no_scaling": aris["none"],
        "inv_sigma": aris["inv_sigma"],
        "alpha_over_sigma_min": lo,
        "alpha_over_sigma_max": hi,
        "trials": len(batch.results),
        "used": len(usable),
        "discarded": len(batch.results) - len(usable),
        "variant": config.variant,
    }
    return ReportBundle(dataset, summary, best_info, batch, trial_ari, labels, histograms, scatter, notes)


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else format_real(v)
    return str(v)


def write_rows(dest, header, rows):
    """Write a CSV table to a path or an open text stream."""
    if hasattr(dest, "write"):
        w = csv.writer(dest, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        write_rows(fh, header, rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def write_bundle(bundle, out_dir, config=None):
    """Write the bundle's files into ``out_dir`` and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    meta = {
        "dataset": bundle.dataset,
        "summary": bundle.summary,
        "best_trial": bundle.best_trial,
        "notes": bundle.notes,
    }
    if config is not None:
        # settings that cannot change results stay out, so reports compare byte for byte
        meta["config"] = {k: v for k, v in asdict(config).items() if k not in ("n_jobs", "output_dir")}
    paths["report"] = out / "report.json"
    paths["report"].write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    s = bundle.summary
    paths["summary"] = out / "summary.csv"
    write_rows(
        paths["summary"],
        ["dataset", "no_scaling", "inv_sigma", "alpha_over_sigma_min", "alpha_over_sigma_max", "used", "discarded"],
        [[bundle.dataset["name"], s["no_scaling"], s["inv_sigma"], s["alpha_over_sigma_min"],
          s["alpha_over_sigma_max"], s["used"], s["discarded"]]],
    )

    if bundle.best_trial is not None:
        b = bundle.best_trial
        paths["factors"] = out / "factors.csv"
        write_rows(
            paths["factors"],
            ["k", "column", "inv_sigma", "alpha", "alpha_over_sigma"],
            [[k + 1, col, b["inv_sigma"][k], b["alpha"][k], b["alpha_over_sigma"][k]]
             for k, col in enumerate(bundle.dataset["columns"])],
        )

    paths["trials"] = out / "trials.jsonl"
    with open(paths["trials"], "w", encoding="utf-8", newline="\n") as fh:
        extra = {i: {"ari_fnc": a} for i, a in bundle.trial_ari.items()}
        write_trial_stream(bundle.trials, fh, extra)

    paths["histograms"] = out / "histograms.csv"
    rows = []
    for scheme, (edges, counts) in bundle.histograms.items():
        for b, c in enumerate(counts):
            rows.append([scheme, b, edges[b], edges[b + 1], int(c)])
    write_rows(paths["histograms"], ["scheme", "bin", "left", "right", "count"], rows)

    paths["scatter"] = out / "scatter.csv"
    write_rows(
        paths["scatter"],
        ["index", "alpha1", "sc", "ari_fnc", "converged"],
        [[p["index"], p["alpha1"], p["sc"], p["ari_fnc"], p["converged"]] for p in bundle.scatter],
    )

    paths["labels"] = out / "labels.csv"
    names = list(bundle.labels)
    cols = [bundle.labels[k] for k in names]
    write_rows(paths["labels"], ["row"] + names, [[i] + [int(c[i]) for c in cols] for i in range(len(cols[0]))])
    return paths


def compare(configs):
    """One summary row per dataset config (runs the full pipeline for each)."""
    rows = []
    for cfg in configs:
        bundle = run_pipeline(cfg)
        s = bundle.summary
        rows.append(
            {
                "dataset": bundle.dataset["name"],
                "no_scaling": s["no_scaling"],
                "inv_sigma": s["inv_sigma"],
                "alpha_over_sigma_min": s["alpha_over_sigma_min"],
                "alpha_over_sigma_max": s["alpha_over_sigma_max"],
            }
        )
    return rows


def _interval_text(lo, hi):
    if lo is None:
        return "unavailable"

    def one(v):
        return f"({v:.3f})" if v < 0 else f"{v:.3f}"

    return f"{one(lo)}-{one(hi)}"


def render_compare(rows):
    """Fixed-width text table of :func:`compare` rows."""
    head = ("Data set", "No scaling", "1/sigma", "alpha/sigma")
    body = [
        (r["dataset"], f"{r['no_scaling']:.3f}", f"{r['inv_sigma']:.3f}",
         _interval_text(r["alpha_over_sigma_min"], r["alpha_over_sigma_max"]))
        for r in rows
    ]
    widths = [max(len(x[i]) for x in [head] + body) for i in range(4)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in [head] + body]
    return "\n".join(lines) + "\n"


def write_compare_csv(rows, path):
    write_rows(
        path,
        ["dataset", "no_scaling", "inv_sigma", "alpha_over_sigma_min", "alpha_over_sigma_max"],
        [[r["dataset"], r["no_scaling"], r["inv_sigma"], r["alpha_over_sigma_min"], r["alpha_over_sigma_max"]]
         for r in rows],
    )
