"""Multi-start local search for shape-complexity scaling factors.

At a constrained stationary point of SC on the sphere ``sum alpha**2 = d`` the
vector of ``r_ij**-3`` is orthogonal to the differences of the per-dimension
``rho_ij**2`` vectors. The default objective squares that orthogonality
residual for dimensions 1 and 2; ``all_pairs`` sums it over every pair of
dimensions, and ``maximize_sc`` instead climbs SC itself with only the
lower bound on ``alpha``.

Each trial draws a random start, projects it onto the feasible set and runs
projected gradient descent with central finite-difference gradients and a
halving line search.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._summation import compensated_sum
from .complexity import ALPHA_FLOOR, sc_gradient, sc_value
from .exceptions import DataError, NumericalError

__all__ = [
    "VARIANTS",
    "TrialConfig",
    "TrialResult",
    "TrialSet",
    "residual",
    "objective",
    "project",
    "solve_local",
    "clustering_alpha",
    "run_trials",
    "trial_rng",
    "initial_point",
    "projected_gradient_norm",
    "fd_gradient",
    "write_trial_stream",
    "read_trial_stream",
]

VARIANTS = ("pair_one_two", "all_pairs", "maximize_sc")
CAP_MESSAGE = "iteration cap reached"
CEILING_MESSAGE = "scale factors unbounded (ceiling reached)"
UNBOUNDED_MESSAGES = (CAP_MESSAGE, CEILING_MESSAGE)


@dataclass(frozen=True)
class TrialConfig:
    """Settings shared by every trial of a batch.

    ``init_low``/``init_high`` default to ``[0.5, 1.5]``, or ``[1e-5, 1]`` for
    ``maximize_sc`` when left as ``None``.
    """

    seed: int = 0
    init_low: float = None
    init_high: float = None
    max_iterations: int = 5000
    alpha_floor: float = ALPHA_FLOOR
    objective_tolerance: float = 1e-12
    step_tolerance: float = 1e-9
    fd_step: float = 1e-6
    alpha_ceiling: float = 1e100
    max_relative_step: float = 1.0

    def bounds(self, variant):
        if variant == "maximize_sc":
            low, high = 1e-5, 1.0
        else:
            low, high = 0.5, 1.5
        low = low if self.init_low is None else self.init_low
        high = high if self.init_high is None else self.init_high
        return low, high

    def validate(self, variant="pair_one_two"):
        low, high = self.bounds(variant)
        if not 0 < low < high:
            raise DataError(f"need 0 < init_low < init_high, got {low}, {high}")
        if self.alpha_floor < ALPHA_FLOOR:
            raise DataError(f"alpha_floor must be >= {ALPHA_FLOOR}")
        if self.max_iterations < 1:
            raise DataError("max_iterations must be >= 1")
        if variant not in VARIANTS:
            raise DataError(f"unknown objective variant {variant!r}; expected one of {VARIANTS}")


@dataclass(frozen=True)
class TrialResult:
    initial_alpha: tuple
    final_alpha: tuple
    objective: float
    sc: float
    converged: bool
    iterations: int
    index: int = 0
    message: str = ""


@dataclass(frozen=True)
class TrialSet:
    results: tuple
    master_seed: int
    variant: str = "pair_one_two"

    @property
    def usable(self):
        """Results that enter summaries.

        Non-converged trials are dropped, except in ``maximize_sc`` where
        stopping at the iteration cap or the ceiling is the expected outcome;
        there only numerical failures are dropped.
        """
        if self.variant == "maximize_sc":
            return tuple(r for r in self.results if r.converged or r.message in UNBOUNDED_MESSAGES)
        return self.converged

    @property
    def discarded(self):
        return len(self.results) - len(self.usable)

    @property
    def converged(self):
        return tuple(r for r in self.results if r.converged)


def clustering_alpha(alpha, variant="pair_one_two"):
    """Factors to cluster with.

    Residual variants return ``alpha`` unchanged. ``maximize_sc`` divides by
    the largest entry: a uniform rescaling leaves distance-based partitions
    unchanged and keeps squared distances finite when ``alpha`` has grown huge.
    """
    alpha = np.asarray(alpha, dtype=float)
    if variant == "maximize_sc":
        return alpha / alpha.max()
    return alpha


def _rho_sq(table):
    return table.materialize()


def residual(table, alpha, k, l):
    """Orthogonality residual ``sum r_ij**-3 (rho_ijk**2 - rho_ijl**2) / N``.

    ``k`` and ``l`` are 0-based dimension indices. ``N = n_orig*(n_orig-1)``
    uses the full row count even though the sum runs over unique pairs.
    """
    d = table.d
    if not (0 <= k < d and 0 <= l < d):
        raise DataError(f"dimension indices must be in 0..{d - 1}")
    if k == l:
        raise DataError("residual needs two different dimensions")
    return float(_residuals(table, np.asarray(alpha, dtype=float), [(k, l)])[0])


def _inv_r3(table, alpha):
    if not np.all(alpha > 0) or not np.all(np.isfinite(alpha)):
        raise NumericalError("scale factors must be finite and positive")
    rho_sq = _rho_sq(table)
    r2 = (rho_sq * (alpha * alpha)).sum(axis=1)
    if np.any(r2 <= 0):
        raise NumericalError("coincident samples (zero pairwise distance)")
    return rho_sq, 1.0 / (r2 * np.sqrt(r2))


def _residuals(table, alpha, dim_pairs):
    rho_sq, w = _inv_r3(table, alpha)
    cols = sorted({k for pair in dim_pairs for k in pair})
    sums = dict(zip(cols, compensated_sum(rho_sq[:, cols] * w[:, None], axis=0)))
    N = table.N
    # difference of compensated sums equals the sum of differences up to rounding
    return np.array([(sums[k] - sums[l]) / N for k, l in dim_pairs])


def _dim_pairs(variant, d):
    if variant == "pair_one_two":
        return [(0, 1)]
    if variant == "all_pairs":
        return [(k, l) for k in range(d) for l in range(k + 1, d)]
    raise DataError(f"no residual for variant {variant!r}")


def objective(table, alpha, variant="pair_one_two"):
    """Value minimised by :func:`solve_local`.

    ``pair_one_two``: squared residual for dimensions 1 and 2.
    ``all_pairs``: sum of squared residuals over every pair of dimensions.
    ``maximize_sc``: ``-SC``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if table.d < 2 and variant != "maximize_sc":
        raise DataError("residual objectives need at least 2 dimensions")
    if variant == "maximize_sc":
        return -sc_value(table, alpha).sc
    res = _residuals(table, alpha, _dim_pairs(variant, table.d))
    return float(np.dot(res, res))


def project(alpha, floor=ALPHA_FLOOR, radius_sq=None):
    """Clamp to ``alpha >= floor`` and, if ``radius_sq`` is given, rescale onto
    the sphere ``sum alpha**2 = radius_sq``.

    Entries at the floor stay fixed while the free ones are rescaled; the
    loop ends because the set of floor-bound entries only grows.
    """
    a = np.maximum(np.asarray(alpha, dtype=float), floor)
    if radius_sq is None:
        return a
    d = a.size
    if radius_sq < d * floor * floor:
        raise DataError("sphere lies below the floor bound")
    active = a <= floor
    for _ in range(d + 1):
        a[active] = floor
        free = ~active
        budget = radius_sq - floor * floor * active.sum()
        a[free] *= math.sqrt(budget / float(np.dot(a[free], a[free])))
        below = free & (a < floor)
        if not below.any():
            break
        active |= below
    return a


def fd_gradient(f, alpha, step=1e-6):
    """Central finite differences with step ``step * max(1, |alpha_k|)``."""
    alpha = np.asarray(alpha, dtype=float)
    grad = np.empty_like(alpha)
    for k in range(alpha.size):
        h = step * max(1.0, abs(alpha[k]))
        up = alpha.copy()
        dn = alpha.copy()
        up[k] += h
        dn[k] -= h
        grad[k] = (f(up) - f(dn)) / (up[k] - dn[k])
    return grad


def projected_gradient_norm(grad, alpha, floor=ALPHA_FLOOR, on_sphere=True):
    """Norm of ``grad`` restricted to directions that stay feasible to first order.

    Components at an active floor whose descent direction points into the
    bound are dropped, then the radial component is removed when the sphere
    constraint applies.
    """
    g = np.array(grad, dtype=float)
    a = np.asarray(alpha, dtype=float)
    at_floor = a <= floor * (1 + 1e-12)
    # descent moves along -g; a positive component at the floor would push below it
    blocked = at_floor & (g > 0)
    g[blocked] = 0.0
    if on_sphere:
        free = ~blocked
        u = np.where(free, a, 0.0)
        nu = float(np.dot(u, u))
        if nu > 0:
            g = g - np.dot(g, u) / nu * u
    return float(np.linalg.norm(g))


def trial_rng(master_seed, index):
    """Independent generator for trial ``index`` of a batch."""
    return np.random.default_rng([int(master_seed) & (2**64 - 1), int(index)])


def initial_point(d, config, variant, index):
    low, high = config.bounds(variant)
    return trial_rng(config.seed, index).uniform(low, high, size=d)


def solve_local(table, init, config=TrialConfig(), variant="pair_one_two", index=0):
    """Run one local solve from ``init``.

    For the residual variants the start is first projected onto the sphere of
    radius ``sqrt(d)`` and every iterate stays on it and above the floor. For
    ``maximize_sc`` only the floor applies; SC has no finite maximiser in
    general, so the run usually stops on the objective tolerance (relative to
    |SC|) once SC stalls, or at the iteration cap with ``converged=False``.

    Never raises on numerical trouble: a non-finite objective ends the trial
    with ``converged=False`` and a message.
    """
    config.validate(variant)
    d = table.d
    floor = config.alpha_floor
    init = np.asarray(init, dtype=float)
    if init.shape != (d,) or not np.all(init > 0):
        raise DataError("initial point must be strictly positive with one entry per dimension")
    sphere = variant != "maximize_sc"
    radius_sq = float(d) if sphere else None
    alpha = project(init, floor, radius_sq)

    if variant == "maximize_sc":
        def f(a):
            return -sc_value(table, a).sc

        def grad(a):
            return -sc_gradient(table, a).gradient
    else:
        def f(a):
            return objective(table, a, variant)

        def grad(a):
            return fd_gradient(f, a, config.fd_step)

    def done(value, it, converged, message=""):
        try:
            sc = sc_value(table, alpha).sc
        except (DataError, NumericalError):
            sc = math.nan
        return TrialResult(
            initial_alpha=tuple(float(x) for x in init),
            final_alpha=tuple(float(x) for x in alpha),
            objective=float(value),
            sc=float(sc),
            converged=converged,
            iterations=it,
            index=index,
            message=message,
        )

    try:
        value = f(alpha)
    except (NumericalError, FloatingPointError, ZeroDivisionError) as exc:
        return done(math.nan, 0, False, f"objective failed at start: {exc}")
    step = config.max_relative_step
    for it in range(1, config.max_iterations + 1):
        try:
            g = grad(alpha)
        except (NumericalError, FloatingPointError, ZeroDivisionError) as exc:
            return done(value, it, False, f"gradient failed: {exc}")
        if not np.all(np.isfinite(g)) or not math.isfinite(value):
            return done(value, it, False, "non-finite objective or gradient")
        # components pushing into an active floor cannot move; drop them so
        # they do not dominate the step length
        g = np.where((alpha <= floor) & (g > 0), 0.0, g)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0 or projected_gradient_norm(g, alpha, floor, sphere) == 0.0:
            return done(value, it, True, "zero projected gradient")
        # scale the trial step to alpha's own magnitude so it is unit-free
        scale = max(float(np.linalg.norm(alpha)), 1.0) / gnorm
        accepted = False
        while step * scale * gnorm > 1e-300:
            cand = project(alpha - step * scale * g, floor, radius_sq)
            try:
                cand_value = f(cand)
            except (NumericalError, FloatingPointError, ZeroDivisionError):
                cand_value = math.inf
            if cand_value < value:
                accepted = True
                break
            step *= 0.5
            if np.linalg.norm(cand - alpha) < config.step_tolerance * 1e-3:
                break
        if accepted and sphere:
            # keep halving while that still helps: an overshooting first
            # decrease can be tiny and would end the run on the change test
            while True:
                half = project(alpha - 0.5 * step * scale * g, floor, radius_sq)
                try:
                    half_value = f(half)
                except (NumericalError, FloatingPointError, ZeroDivisionError):
                    break
                if not half_value < cand_value:
                    break
                cand, cand_value, step = half, half_value, 0.5 * step
        if not accepted:
            # no feasible descent at any resolvable step length
            return done(value, it, True, "line search exhausted")
        if sphere:
            moved = float(np.linalg.norm(cand - alpha))
            change = value - cand_value
            tol = config.objective_tolerance
        else:
            # SC only sees the direction of alpha and may grow without bound
            # along it, so both tests are scale-free here
            moved = float(np.linalg.norm(cand / np.linalg.norm(cand) - alpha / np.linalg.norm(alpha)))
            change = (value - cand_value) / abs(cand_value)
            tol = config.objective_tolerance
        alpha, value = cand, cand_value
        if change < tol or moved < config.step_tolerance:
            return done(value, it, True)
        if not sphere and alpha.max() > config.alpha_ceiling:
            return done(value, it, False, CEILING_MESSAGE)
        step = min(step * 2.0, config.max_relative_step)
    return done(value, config.max_iterations, False, CAP_MESSAGE)


def run_trials(table, count, config=TrialConfig(), variant="pair_one_two", n_jobs=1, require_usable=True):
    """Run ``count`` independent trials; trial ``t`` is seeded from ``(config.seed, t)``.

    Results are stored by trial index, so the batch is identical for any
    ``n_jobs``.

    Raises
    ------
    NumericalError
        If no trial is usable and ``require_usable`` is true.
    """
    if count < 1:
        raise DataError("trial count must be >= 1")
    config.validate(variant)

    def one(t):
        return solve_local(table, initial_point(table.d, config, variant, t), config, variant, index=t)

    if n_jobs == 1:
        results = [one(t) for t in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=None if n_jobs < 1 else n_jobs) as pool:
            results = list(pool.map(one, range(count)))
    batch = TrialSet(results=tuple(results), master_seed=config.seed, variant=variant)
    if require_usable and not batch.usable:
        reasons = sorted({r.message for r in results})
        raise NumericalError(f"all {count} trials failed: {'; '.join(reasons)}")
    return batch


def _record(r, variant, usable):
    rec = asdict(r)
    rec["initial_alpha"] = list(r.initial_alpha)
    rec["final_alpha"] = list(r.final_alpha)
    rec["discarded"] = r.index not in usable
    rec["variant"] = variant
    return rec


def write_trial_stream(batch, fh, extra=None):
    """Write one JSON object per trial, in index order.

    ``extra`` maps a trial index to additional fields (for example its
    ARI_fnc) merged into that record.
    """
    usable = {r.index for r in batch.usable}
    for r in batch.results:
        rec = _record(r, batch.variant, usable)
        if extra and r.index in extra:
            rec.update(extra[r.index])
        fh.write(json.dumps(rec, sort_keys=True, allow_nan=True) + "\n")


def read_trial_stream(fh, master_seed=0, variant=None):
    """Inverse of :func:`write_trial_stream`; the variant is taken from the records unless given."""
    results = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if variant is None:
            variant = rec.get("variant", "pair_one_two")
        results.append(
            TrialResult(
                initial_alpha=tuple(rec["initial_alpha"]),
                final_alpha=tuple(rec["final_alpha"]),
                objective=rec["objective"],
                sc=rec["sc"],
                converged=rec["converged"],
                iterations=rec["iterations"],
                index=rec.get("index", len(results)),
                message=rec.get("message", ""),
            )
        )
    return TrialSet(results=tuple(results), master_seed=master_seed, variant=variant or "pair_one_two")
