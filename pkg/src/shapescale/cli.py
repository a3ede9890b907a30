"""Command-line interface.

Subcommands: ``ingest``, ``search``, ``cluster``, ``evaluate``, ``hist``,
``compare`` and ``pipeline``. Settings come from built-in defaults, then an
optional ``--config`` file of ``key = value`` lines (keys are the long flag
names with ``_`` or ``-``), then flags. Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ari import ari_fnc
from .exceptions import DataError, NumericalError, ShapeScaleError
from .ingest import (
    ScalingScheme,
    apply_scaling,
    column_sigmas,
    deduplicate,
    impute_mean,
    load_csv,
    pca_reduce,
    write_csv,
)
from .kmeans import kmeans
from .problem import VARIANTS, clustering_alpha, read_trial_stream, run_trials, write_trial_stream
from .report import (
    PipelineConfig,
    compare,
    distance_histogram,
    prepare,
    render_compare,
    run_pipeline,
    write_bundle,
    write_compare_csv,
    write_rows,
)

log = logging.getLogger("shapescale")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ShapeScaleError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if str(text).strip().lower() in ("", "none") else int(text)


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


def _tokens(text):
    return tuple(t for t in str(text).split("|"))


# how a config-file value or flag string becomes a PipelineConfig field
CONVERTERS = {
    "header": _bool,
    "impute": _bool,
    "pca": _opt_int,
    "trials": int,
    "seed": int,
    "max_iterations": int,
    "alpha_floor": float,
    "init_low": _opt_float,
    "init_high": _opt_float,
    "objective_tolerance": float,
    "step_tolerance": float,
    "kmeans_restarts": int,
    "kmeans_seed": int,
    "kmeans_max_iter": int,
    "kmeans_tol": float,
    "clusters": _opt_int,
    "bins": int,
    "n_jobs": int,
    "missing": _tokens,
}


def read_config_file(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    known = {f.name for f in fields(PipelineConfig)}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _convert(key, value):
    if value is None:
        return None
    conv = CONVERTERS.get(key)
    if conv is None or not isinstance(value, str):
        return value
    try:
        return conv(value)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r} ({exc})") from None


def build_config(args):
    """Defaults, then the config file, then explicit flags."""
    cfg = PipelineConfig()
    updates = {}
    if getattr(args, "config", None):
        updates.update(read_config_file(args.config))
    for f in fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            updates[f.name] = v
    return replace(cfg, **{k: _convert(k, v) for k, v in updates.items()})


def _add_input(p, required=True):
    p.add_argument("input", nargs=None if required else "?", help="CSV file")
    p.add_argument("--config", help="key = value settings file (flags override it)")
    p.add_argument("--delimiter")
    p.add_argument("--header", help="true/false (default true)")
    p.add_argument("--label-column", dest="label_column", help="label column name or 0-based index")
    p.add_argument("--missing", help="missing-value tokens separated by '|' (default: empty and '?')")
    p.add_argument("--impute", help="fill missing cells with column means: true/false (default true)")
    p.add_argument("--pca", help="project onto this many principal components")


def _add_trials(p):
    p.add_argument("--trials", help="number of random starts (default 200)")
    p.add_argument("--seed", help="master seed for the trial batch (default 0)")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--max-iterations", dest="max_iterations")
    p.add_argument("--alpha-floor", dest="alpha_floor")
    p.add_argument("--init-low", dest="init_low")
    p.add_argument("--init-high", dest="init_high")
    p.add_argument("--objective-tolerance", dest="objective_tolerance")
    p.add_argument("--step-tolerance", dest="step_tolerance")
    p.add_argument("--n-jobs", dest="n_jobs", help="threads for the trial batch")


def _add_kmeans(p):
    p.add_argument("--clusters", help="cluster count (default: number of reference classes)")
    p.add_argument("--kmeans-restarts", dest="kmeans_restarts")
    p.add_argument("--kmeans-seed", dest="kmeans_seed")
    p.add_argument("--kmeans-max-iter", dest="kmeans_max_iter")
    p.add_argument("--kmeans-tol", dest="kmeans_tol")


def _add_scheme(p):
    p.add_argument("--scheme", choices=("none", "inv_sigma", "alpha_over_sigma"), default="inv_sigma")
    p.add_argument("--alpha", help="comma-separated scaling factors (alpha_over_sigma)")
    p.add_argument("--trials-file", dest="trials_file", help="trial stream to take alpha from")
    p.add_argument("--trial", type=int, help="trial index in --trials-file (default: lowest objective)")


def make_parser():
    parser = _Parser(prog="shapescale", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("ingest", help="load, impute, reduce and describe a dataset")
    _add_input(p)
    p.add_argument("-o", "--output", help="write the prepared matrix here")

    p = sub.add_parser("search", help="run a batch of local solves and write the trial stream")
    _add_input(p)
    _add_trials(p)
    p.add_argument("-o", "--output", required=True, help="trial stream (.jsonl)")

    p = sub.add_parser("cluster", help="scale and partition with k-means (labels not needed)")
    _add_input(p)
    _add_kmeans(p)
    _add_scheme(p)
    p.add_argument("-o", "--output", required=True, help="label CSV")

    p = sub.add_parser("evaluate", help="score a label file against reference labels")
    p.add_argument("reference", help="CSV holding the reference labels")
    p.add_argument("obtained", help="CSV holding the obtained labels")
    p.add_argument("--reference-column", default="-1", help="name or index (default: last column)")
    p.add_argument("--obtained-column", default="-1", help="name or index (default: last column)")
    p.add_argument("--clusters", type=int, help="fixed cluster count (default: distinct obtained labels)")

    p = sub.add_parser("hist", help="histogram of pairwise distances under a scaling scheme")
    _add_input(p)
    _add_scheme(p)
    p.add_argument("--bins", help="bin count (default 50)")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")

    p = sub.add_parser("compare", help="summary table over one or more datasets")
    p.add_argument("inputs", nargs="+", help="CSV files; all share the other settings")
    p.add_argument("--config")
    p.add_argument("--delimiter")
    p.add_argument("--header")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--missing")
    p.add_argument("--impute")
    p.add_argument("--pca")
    _add_trials(p)
    _add_kmeans(p)
    p.add_argument("-o", "--output", help="CSV path for the table")

    p = sub.add_parser("pipeline", help="full run: trials, clustering, ARI, histograms, report bundle")
    _add_input(p)
    _add_trials(p)
    _add_kmeans(p)
    p.add_argument("--bins")
    p.add_argument("--name", help="dataset name in reports")
    p.add_argument("-o", "--output-dir", dest="output_dir", required=True)
    return parser


def _load(cfg):
    data = load_csv(cfg.input, delimiter=cfg.delimiter, header=cfg.header,
                    label_column=cfg.label_column, missing=cfg.missing)
    if data.has_missing:
        if not cfg.impute:
            raise DataError("missing cells present and imputation is disabled")
        data = impute_mean(data)
    retained = None
    if cfg.pca is not None:
        data, retained = pca_reduce(data, cfg.pca)
    return data, retained


def _pick_alpha(args, d):
    if args.alpha:
        alpha = [float(a) for a in args.alpha.split(",")]
    elif args.trials_file:
        with open(args.trials_file, encoding="utf-8") as fh:
            batch = read_trial_stream(fh)
        pool = list(batch.usable) or list(batch.results)
        if args.trial is not None:
            match = [r for r in batch.results if r.index == args.trial]
            if not match:
                raise UsageError(f"trial {args.trial} not in {args.trials_file}")
            chosen = match[0]
        else:
            chosen = min(pool, key=lambda r: (r.objective, r.index))
        alpha = clustering_alpha(chosen.final_alpha, batch.variant).tolist()
    else:
        raise UsageError("alpha_over_sigma needs --alpha or --trials-file")
    if len(alpha) != d:
        raise DataError(f"{len(alpha)} scaling factors for {d} columns")
    return tuple(alpha)


def _scheme(args, d):
    if args.scheme == "alpha_over_sigma":
        return ScalingScheme("alpha_over_sigma", _pick_alpha(args, d))
    return ScalingScheme(args.scheme)


def cmd_ingest(args, cfg):
    data, retained = _load(cfg)
    sigmas = column_sigmas(data)
    view = deduplicate(data)
    info = {
        "input": cfg.input,
        "n_orig": data.n_orig,
        "n_unique": view.n,
        "d": data.d,
        "columns": list(data.column_names),
        "sigma": sigmas.tolist(),
        "inv_sigma": (1.0 / sigmas).tolist(),
        "variance_retained": retained,
        "labels": data.reference_labels is not None,
    }
    if args.output:
        write_csv(data, args.output)
    print(json.dumps(info, indent=2))


def cmd_search(args, cfg):
    prep = prepare(cfg)
    batch = run_trials(prep.table, cfg.trials, cfg.trial_config(), cfg.variant, n_jobs=cfg.n_jobs)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        write_trial_stream(batch, fh)
    used = len(batch.usable)
    print(f"{len(batch.results)} trials, {used} used, {batch.discarded} discarded -> {args.output}")


def cmd_cluster(args, cfg):
    data, _ = _load(cfg)
    sigmas = column_sigmas(data)
    C = cfg.clusters
    if C is None:
        if data.reference_labels is None:
            raise UsageError("--clusters is required when the data has no label column")
        C = len(set(data.reference_labels))
    scaled = apply_scaling(data, sigmas, _scheme(args, data.d))
    part = kmeans(scaled.values, C, cfg.kmeans_config())
    rows = [[i, int(c)] for i, c in enumerate(part.labels)]
    write_rows(args.output, ["row", "cluster"], rows)
    print(f"{C} clusters, within-cluster SS {part.within_ss:.6g} -> {args.output}")


def _label_column(path, column):
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    head, body = rows[0], rows[1:]
    try:
        idx = int(column)
    except ValueError:
        if column not in head:
            raise DataError(f"{path}: no column {column!r}") from None
        idx = head.index(column)
    return [r[idx].strip() for r in body]


def cmd_evaluate(args, cfg):
    ref = _label_column(args.reference, args.reference_column)
    obt = _label_column(args.obtained, args.obtained_column)
    rep = ari_fnc(np.array(ref), np.array(obt), args.clusters)
    out = {
        "TS": rep.counts.TS, "TD": rep.counts.TD, "FD": rep.counts.FD, "FS": rep.counts.FS,
        "ri": rep.ri, "expected_ri": rep.expected_ri, "u": rep.u, "v": rep.v, "ari_fnc": rep.ari_fnc,
    }
    print(json.dumps(out, indent=2))


def cmd_hist(args, cfg):
    data, _ = _load(cfg)
    sigmas = column_sigmas(data)
    scaled = apply_scaling(data, sigmas, _scheme(args, data.d))
    edges, counts = distance_histogram(scaled.values, cfg.bins)
    rows = [[b, edges[b], edges[b + 1], int(c)] for b, c in enumerate(counts)]
    header = ["bin", "left", "right", "count"]
    write_rows(args.output or sys.stdout, header, rows)


def cmd_compare(args, cfg):
    configs = [replace(cfg, input=path, name=Path(path).stem) for path in args.inputs]
    rows = compare(configs)
    if args.output:
        write_compare_csv(rows, args.output)
    sys.stdout.write(render_compare(rows))


def cmd_pipeline(args, cfg):
    bundle = run_pipeline(cfg)
    paths = write_bundle(bundle, cfg.output_dir, cfg)
    s = bundle.summary
    lo, hi = s["alpha_over_sigma_min"], s["alpha_over_sigma_max"]
    interval = "unavailable" if lo is None else f"{lo:.3f}-{hi:.3f}"
    print(f"{bundle.dataset['name']}: no scaling {s['no_scaling']:.3f}, 1/sigma {s['inv_sigma']:.3f}, "
          f"alpha/sigma {interval} ({s['used']} trials used, {s['discarded']} discarded)")
    print(f"report written to {paths['report'].parent}")


COMMANDS = {
    "ingest": cmd_ingest,
    "search": cmd_search,
    "cluster": cmd_cluster,
    "evaluate": cmd_evaluate,
    "hist": cmd_hist,
    "compare": cmd_compare,
    "pipeline": cmd_pipeline,
}


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = build_config(args)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"shapescale: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"shapescale: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"shapescale: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
