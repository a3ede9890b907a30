"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (printed in the terminal summary) with
the measured values, then asserts. Each tolerance is fixed per criterion.

The banknote criteria need ``data_banknote_authentication.txt`` (1372 rows,
4 features, class last, no header). Point ``BANKNOTE_CSV`` at it or place it
at ``tests/data/banknote.csv``. Without the file those two criteria are
reported as FAIL and marked as expected failures.
"""

import filecmp
import itertools
import math
import os
import time
from fractions import Fraction
from math import comb, factorial
from pathlib import Path

import numpy as np
import pytest

from shapescale.ari import ari_fnc, pair_counts_bruteforce, stirling_ratio
from shapescale.complexity import pair_table_from_matrix, sc_gradient, sc_value
from shapescale.ingest import ScalingScheme, apply_scaling, column_sigmas, load_csv, pca_reduce
from shapescale.kmeans import kmeans
from shapescale.problem import fd_gradient, objective, projected_gradient_norm
from shapescale.report import PipelineConfig, run_pipeline, write_bundle

DATA = Path(__file__).parent / "data"
IRIS = DATA / "iris.csv"


def banknote_path():
    p = os.environ.get("BANKNOTE_CSV")
    candidates = [Path(p)] if p else []
    candidates.append(DATA / "banknote.csv")
    for c in candidates:
        if c.is_file():
            return c
    return None


def need_banknote(acceptance, number):
    path = banknote_path()
    if path is None:
        acceptance(number, False, "banknote data not available (set BANKNOTE_CSV); criterion not evaluated")
        pytest.xfail("banknote dataset not available in this environment")
    return path


@pytest.fixture(scope="module")
def iris_batch():
    t0 = time.perf_counter()
    cfg = PipelineConfig(input=str(IRIS), label_column="species", trials=200, seed=0)
    bundle = run_pipeline(cfg)
    return bundle, time.perf_counter() - t0


def test_criterion_01_iris_sigma_factors(acceptance):
    t0 = time.perf_counter()
    data = load_csv(IRIS, label_column="species")
    inv = 1.0 / column_sigmas(data)
    elapsed = time.perf_counter() - t0
    want = np.array([1.207, 2.294, 0.566, 1.311])
    err = float(np.max(np.abs(inv - want)))
    ok = err <= 0.002 and elapsed < 1.0
    acceptance(1, ok, f"1/sigma = {np.round(inv, 5).tolist()}, max |err| {err:.2e} (tol 2e-3), {elapsed:.3f} s")
    assert ok


def test_criterion_02_iris_baselines(acceptance):
    t0 = time.perf_counter()
    data = load_csv(IRIS, label_column="species")
    y = data.label_codes()
    raw = ari_fnc(y, kmeans(data.values, 3)).ari_fnc
    scaled = apply_scaling(data, column_sigmas(data), ScalingScheme("inv_sigma")).values
    inv = ari_fnc(y, kmeans(scaled, 3)).ari_fnc
    elapsed = time.perf_counter() - t0
    ok = abs(raw - 0.728) <= 0.02 and abs(inv - 0.621) <= 0.03 and elapsed < 5.0
    acceptance(2, ok, f"no scaling {raw:.4f} (0.728 +- 0.02), 1/sigma {inv:.4f} (0.621 +- 0.03), {elapsed:.2f} s")
    assert ok


def test_criterion_03_iris_problem_p(acceptance, iris_batch):
    bundle, elapsed = iris_batch
    s = bundle.summary
    best = s["alpha_over_sigma_max"]
    frac = s["discarded"] / s["trials"]
    ok = best is not None and best >= 0.85 and frac <= 0.02 and elapsed < 600
    acceptance(
        3, ok,
        f"max ARI_fnc {best:.4f} (>= 0.85), min {s['alpha_over_sigma_min']:.4f}, "
        f"non-converged {s['discarded']}/{s['trials']} (<= 2%), {elapsed:.0f} s (< 600 s)",
    )
    assert ok


def test_criterion_04_banknote_pca(acceptance):
    path = need_banknote(acceptance, 4)
    data = load_csv(path, header=False, label_column=-1)
    _, kept = pca_reduce(data, 3)
    ok = abs(kept - 0.9702) <= 0.001
    acceptance(4, ok, f"variance retained {kept:.5f} (0.9702 +- 0.001)")
    assert ok


def test_criterion_05_banknote_dr3(acceptance):
    path = need_banknote(acceptance, 5)
    cfg = PipelineConfig(input=str(path), header=False, label_column="-1", pca=3, trials=200, n_jobs=os.cpu_count())
    s = run_pipeline(cfg).summary
    best = s["alpha_over_sigma_max"]
    ok = best is not None and best >= 0.50 and s["inv_sigma"] <= 0.10
    acceptance(5, ok, f"max ARI_fnc {best} (>= 0.50), 1/sigma {s['inv_sigma']:.4f} (<= 0.10)")
    assert ok


def test_criterion_06_iris_max_sc(acceptance):
    cfg = PipelineConfig(input=str(IRIS), label_column="species", trials=30, variant="maximize_sc")
    bundle = run_pipeline(cfg)
    best = bundle.best_trial
    floored = [a <= 1e-5 for a in best["alpha"]]
    ok = floored[0] and floored[1] and best["ari_fnc"] >= 0.85
    ties = sorted(i for i, v in bundle.trial_ari.items() if v == best["ari_fnc"])
    acceptance(
        6, ok,
        f"best trial {best['index']} (tied: {ties}): alpha1, alpha2 at floor = {floored[:2]}, "
        f"ARI_fnc {best['ari_fnc']:.4f} (>= 0.85)",
    )
    assert ok


def _instance(rng, d_min=1):
    n = int(rng.integers(3, 41))
    d = int(rng.integers(d_min, 7))
    Z = rng.normal(size=(n, d)) * rng.uniform(0.1, 10.0, size=d)
    return Z, rng.uniform(0.05, 3.0, size=d)


def test_criterion_07_radial_invariance(acceptance):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        Z, alpha = _instance(rng)
        t = 10.0 ** rng.uniform(-3, 3)
        table = pair_table_from_matrix(Z)
        base = sc_value(table, alpha).sc
        worst = max(worst, abs(sc_value(table, t * alpha).sc - base) / base)
    ok = worst <= 1e-10
    acceptance(7, ok, f"max |SC(t a) - SC(a)| / SC = {worst:.2e} over 100 instances (tol 1e-10)")
    assert ok


def _sc_numpy(Z, alpha):
    # independent of the package: plain pairwise loop in numpy
    diffs = (Z[:, None, :] - Z[None, :, :]) * alpha
    r = np.sqrt((diffs**2).sum(axis=2))[np.triu_indices(len(Z), 1)]
    return math.sqrt(math.fsum(r * r)) * math.fsum(1.0 / r)


def test_criterion_08_gradient(acceptance):
    rng = np.random.default_rng(8)
    worst_fd = worst_dir = 0.0
    for _ in range(100):
        # with d = 1 SC is constant and its gradient identically zero, so a
        # relative comparison needs d >= 2
        Z, alpha = _instance(rng, d_min=2)
        ev = sc_gradient(pair_table_from_matrix(Z), alpha)
        fd = fd_gradient(lambda a: _sc_numpy(Z, a), alpha, 1e-6)
        scale = np.linalg.norm(fd)
        worst_fd = max(worst_fd, float(np.linalg.norm(ev.gradient - fd) / scale))
        worst_dir = max(worst_dir, abs(float(np.dot(alpha, ev.gradient))) / ev.sc)
    ok = worst_fd <= 1e-6 and worst_dir <= 1e-9
    acceptance(8, ok, f"gradient vs finite differences {worst_fd:.2e} (tol 1e-6), "
                      f"|sum a_k SC'_k| / SC {worst_dir:.2e} (tol 1e-9)")
    assert ok


def test_criterion_09_identities(acceptance):
    rng = np.random.default_rng(9)
    worst_n = worst_g = 0.0
    bound_ok = True
    for _ in range(50):
        n = int(rng.integers(3, 41))
        d = int(rng.integers(1, 7))
        X = rng.normal(size=(n, d)) * rng.uniform(0.1, 100.0, size=d)
        Z = X / X.std(axis=0, ddof=1)
        alpha = rng.uniform(0.1, 3.0, size=d)
        table = pair_table_from_matrix(Z)
        N = n * (n - 1)
        sums = table.rho_sq.sum(axis=0)
        worst_n = max(worst_n, float(np.max(np.abs(sums - N) / N)))
        ev = sc_value(table, alpha)
        worst_g = max(worst_g, abs(ev.g**2 - N * np.sum(alpha**2)) / (N * np.sum(alpha**2)))
        m = n * (n - 1) / 2
        bound_ok &= ev.sc >= m**1.5 * (1 - 1e-12)
    worst_eq = 0.0
    for d in range(2, 9):
        m = d * (d - 1) / 2
        sc = sc_value(pair_table_from_matrix(np.eye(d) * 3.7), np.ones(d)).sc
        worst_eq = max(worst_eq, abs(sc - m**1.5) / m**1.5)
    ok = worst_n <= 1e-8 and worst_g <= 1e-8 and bound_ok and worst_eq <= 1e-10
    acceptance(9, ok, f"sum rho^2 = N {worst_n:.1e}, g^2 = N sum a^2 {worst_g:.1e} (tol 1e-8); "
                      f"lower bound holds {bound_ok}; simplex equality {worst_eq:.1e} (tol 1e-10)")
    assert ok


def test_criterion_10_constraints(acceptance, iris_batch, iris_table):
    bundle, _ = iris_batch
    converged = [r for r in bundle.trials.results if r.converged]
    worst_sphere = worst_stat = 0.0
    min_alpha = math.inf
    for r in converged:
        a = np.array(r.final_alpha)
        worst_sphere = max(worst_sphere, abs(float(np.sum(a * a)) - a.size))
        min_alpha = min(min_alpha, float(a.min()))
        g = fd_gradient(lambda x: objective(iris_table, x), a)
        worst_stat = max(worst_stat, projected_gradient_norm(g, a) / max(1.0, float(np.linalg.norm(g))))
    ok = bool(converged) and worst_sphere <= 1e-8 and min_alpha >= 1e-5 and worst_stat <= 1e-6
    acceptance(10, ok, f"{len(converged)} converged trials: |sum a^2 - d| {worst_sphere:.1e} (tol 1e-8), "
                       f"min alpha {min_alpha:.3g} (>= 1e-5), stationarity {worst_stat:.1e} (tol 1e-6)")
    assert ok


def _stirling(n, k):
    return sum((-1) ** j * comb(k, j) * (k - j) ** n for j in range(k + 1)) // factorial(k)


def _ari_oracle(ref, obt):
    c = pair_counts_bruteforce(ref, obt)
    n = len(ref)
    C = len(set(obt))
    pairs = comb(n, 2)
    u = Fraction(_stirling(n - 1, C), _stirling(n, C))
    v = Fraction(c.TS + c.FD, pairs)
    e = u * v + (1 - u) * (1 - v)
    return None if e == 1 else (Fraction(c.TS + c.TD, pairs) - e) / (1 - e)


def _partitions(n):
    if n == 0:
        yield ()
        return
    for p in _partitions(n - 1):
        for c in range(max(p, default=-1) + 2):
            yield p + (c,)


def test_criterion_11_ari_oracle(acceptance):
    checked = mismatches = 0
    for n in range(2, 7):
        parts = list(_partitions(n))
        for ref, obt in itertools.product(parts, parts):
            want = _ari_oracle(ref, obt)
            if want is None:
                continue
            checked += 1
            mismatches += ari_fnc(ref, obt).ari_fnc != float(want)
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(7, 201))
        C = int(rng.integers(2, min(10, n) + 1))
        obt = rng.integers(0, C, size=n)
        obt[:C] = np.arange(C)
        ref = rng.integers(0, int(rng.integers(1, 7)), size=n)
        want = _ari_oracle(ref.tolist(), obt.tolist())
        if want is None:
            continue
        checked += 1
        mismatches += ari_fnc(ref, obt).ari_fnc != float(want)
    worst = 0.0
    for n in range(2, 201):
        for C in range(2, min(n, 10) + 1):
            exact = Fraction(_stirling(n - 1, C), _stirling(n, C))
            got = Fraction(stirling_ratio(n, C))
            worst = max(worst, float(abs(got - exact) / exact) if exact else float(got != 0))
    hand = ari_fnc(["a", "a", "b", "b"], [0, 1, 0, 1]).ari_fnc
    ok = mismatches == 0 and worst <= 1e-12 and hand == -0.4
    acceptance(11, ok, f"{checked} partition pairs, {mismatches} mismatches; Stirling ratio rel err {worst:.1e} "
                       f"(tol 1e-12); hand case {hand!r}")
    assert ok


def _tree_equal(a, b):
    cmp = filecmp.dircmp(a, b)
    names = sorted(cmp.common_files)
    same, diff, errs = filecmp.cmpfiles(a, b, names, shallow=False)
    return not (cmp.left_only or cmp.right_only or diff or errs), len(same)


def test_criterion_12_determinism(acceptance, tmp_path):
    results = []
    for variant, trials in (("pair_one_two", 12), ("maximize_sc", 4)):
        dirs = []
        for run, jobs in enumerate((1, 1, 4)):
            cfg = PipelineConfig(input=str(IRIS), label_column="species", trials=trials, seed=42,
                                 variant=variant, kmeans_restarts=10, n_jobs=jobs)
            out = tmp_path / f"{variant}_{run}"
            write_bundle(run_pipeline(cfg), out, cfg)
            dirs.append(out)
        for other in dirs[1:]:
            results.append(_tree_equal(dirs[0], other))
    ok = all(same for same, _ in results)
    files = results[0][1]
    acceptance(12, ok, f"{len(results)} rerun comparisons (serial and 4 threads, two variants), "
                       f"{files} files each, byte-identical: {ok}")
    assert ok
