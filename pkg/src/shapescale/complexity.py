"""Shape complexity of a point set as a function of per-dimension scale factors.

For unique samples ``i < j`` with normalised differences
``rho_ijk = (X_ik - X_jk) / sigma_k`` and scale factors ``alpha``, the
pairwise distances are ``r_ij = sqrt(sum_k alpha_k**2 rho_ijk**2)`` and

    SC = g * h,   g = sqrt(sum r_ij**2),   h = sum 1 / r_ij.

``SC`` is invariant under ``alpha -> t * alpha`` for every ``t > 0``.
"""

from dataclasses import dataclass

import numpy as np

from ._summation import compensated_sum
from .exceptions import DataError, NumericalError

__all__ = [
    "PairTable",
    "ScEvaluation",
    "pair_table",
    "pair_table_from_matrix",
    "sc_value",
    "sc_gradient",
    "cases_c1_c2",
    "ALPHA_FLOOR",
]

ALPHA_FLOOR = 1e-5
DEFAULT_MEMORY_BUDGET = 2 * 1024**3
EQUILIBRIUM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PairTable:
    """Squared normalised differences for every unordered pair of unique samples.

    Pairs are in lexicographic ``(i, j)``, ``i < j`` order. When ``rho_sq`` is
    ``None`` the table is in on-the-fly mode: it keeps the normalised samples
    and recomputes pair differences block by block on demand.

    Attributes
    ----------
    n : int
        Number of unique samples.
    d : int
        Number of dimensions.
    n_orig : int
        Row count of the full matrix the sigmas came from; ``N = n_orig*(n_orig-1)``.
    rho_sq : ndarray of shape (n*(n-1)/2, d) or None
    """

    n: int
    d: int
    n_orig: int
    rho_sq: np.ndarray = None
    normalized: np.ndarray = None
    chunk_pairs: int = 1 << 16

    @property
    def n_pairs(self):
        return self.n * (self.n - 1) // 2

    @property
    def N(self):
        return self.n_orig * (self.n_orig - 1)

    @property
    def on_the_fly(self):
        return self.rho_sq is None

    def blocks(self):
        """Yield ``rho_sq`` in consecutive chunks of ``chunk_pairs`` pairs.

        Both storage modes produce the same chunks, so pair sums agree bitwise.
        """
        c = self.chunk_pairs
        if self.rho_sq is not None:
            for a in range(0, self.n_pairs, c):
                yield self.rho_sq[a:a + c]
            return
        z = self.normalized
        pending, size = [], 0
        for i in range(self.n - 1):
            diff = z[i + 1:] - z[i]
            pending.append(diff * diff)
            size += len(diff)
            while size >= c:
                buf = np.concatenate(pending, axis=0)
                yield buf[:c]
                pending, size = [buf[c:]], size - c
        if size:
            yield np.concatenate(pending, axis=0)

    def materialize(self):
        """All pairs as one ``(n_pairs, d)`` array (copies in on-the-fly mode)."""
        if self.rho_sq is not None:
            return self.rho_sq
        return np.concatenate(list(self.blocks()), axis=0)


@dataclass(frozen=True, eq=False)
class ScEvaluation:
    """``sc``, its factors ``g`` and ``h``, and optionally the gradient and distances."""

    sc: float
    g: float
    h: float
    gradient: np.ndarray = None
    g_grad: np.ndarray = None
    h_grad: np.ndarray = None
    distances: np.ndarray = None


def pair_table_from_matrix(
    normalized, n_orig=None, memory_budget=DEFAULT_MEMORY_BUDGET, on_the_fly=False, chunk_pairs=1 << 16
):
    """Build a :class:`PairTable` from rows already divided by their sigmas.

    Parameters
    ----------
    normalized : ndarray of shape (n, d)
        Distinct samples, each column divided by its sigma.
    n_orig : int, optional
        Row count of the full matrix; defaults to ``n``.
    memory_budget : int, default=2 GiB
        Maximum size in bytes of the precomputed table.
    on_the_fly : bool, default=False
        Store only the samples and recompute pair differences on demand.
    chunk_pairs : int, default=65536
        Pairs per reduction chunk; fixes the summation order.
    """
    z = np.array(normalized, dtype=float)
    z.setflags(write=False)
    n, d = z.shape
    if n < 2:
        raise DataError("a pair table needs at least 2 samples")
    n_orig = n if n_orig is None else int(n_orig)
    if n_orig < n:
        raise DataError(f"n_orig={n_orig} is smaller than the number of unique samples {n}")
    if on_the_fly:
        return PairTable(n=n, d=d, n_orig=n_orig, normalized=z, chunk_pairs=chunk_pairs)
    n_pairs = n * (n - 1) // 2
    nbytes = n_pairs * d * 8
    if nbytes > memory_budget:
        raise DataError(
            f"pair table needs {nbytes / 2**20:.0f} MiB (> budget {memory_budget / 2**20:.0f} MiB); "
            "use on-the-fly mode"
        )
    iu, ju = np.triu_indices(n, k=1)
    diff = z[iu] - z[ju]
    rho_sq = diff * diff
    rho_sq.setflags(write=False)
    return PairTable(n=n, d=d, n_orig=n_orig, rho_sq=rho_sq, normalized=z, chunk_pairs=chunk_pairs)


def pair_table(view, data, sigmas, **kwargs):
    """Pair table over the unique rows of ``data`` listed in ``view``.

    ``sigmas`` must come from all ``n_orig`` rows of ``data``.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.shape != (data.d,) or not np.all(sigmas > 0):
        raise DataError("sigmas must be positive, one per column")
    idx = np.asarray(view.indices)
    if idx.size and (idx.min() < 0 or idx.max() >= data.n_orig):
        raise DataError("unique view does not match the dataset")
    return pair_table_from_matrix(data.values[idx] / sigmas, n_orig=data.n_orig, **kwargs)


def _check_alpha(table, alpha):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (table.d,):
        raise DataError(f"expected {table.d} scale factors, got shape {alpha.shape}")
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
        raise DataError("scale factors must be finite and positive")
    return alpha


def _distances_sq(rho_sq, alpha_sq):
    # elementwise reduction over the (small) d axis keeps results independent
    # of BLAS threading
    return (rho_sq * alpha_sq).sum(axis=1)


def _combine(partials):
    if len(partials) == 1:
        return partials[0]
    return compensated_sum(np.stack(partials), axis=0)


def _pair_sums(table, alpha, with_gradient, keep_distances):
    # each chunk is reduced on the spot; chunk partials are combined at the end
    alpha_sq = alpha * alpha
    g_sq, h, rho_sum, w_sum, dist = [], [], [], [], []
    for block in table.blocks():
        r2 = _distances_sq(block, alpha_sq)
        if np.any(r2 <= 0):
            raise NumericalError("coincident samples (zero pairwise distance); deduplicate first")
        r = np.sqrt(r2)
        g_sq.append(compensated_sum(r2))
        h.append(compensated_sum(1.0 / r))
        if with_gradient:
            rho_sum.append(compensated_sum(block, axis=0))
            w_sum.append(compensated_sum(block / (r2 * r)[:, None], axis=0))
        if keep_distances:
            dist.append(r)
    out = {"g_sq": _combine(g_sq), "h": _combine(h)}
    if with_gradient:
        out["rho_sum"] = _combine(rho_sum)
        out["w_sum"] = _combine(w_sum)
    if keep_distances:
        out["distances"] = np.concatenate(dist)
    return out


def sc_value(table, alpha, keep_distances=False):
    """Evaluate ``SC = g*h`` at ``alpha``.

    Raises
    ------
    NumericalError
        If two samples coincide (``r_ij == 0``).
    """
    alpha = _check_alpha(table, alpha)
    s = _pair_sums(table, alpha, False, keep_distances)
    g = float(np.sqrt(s["g_sq"]))
    h = float(s["h"])
    return ScEvaluation(sc=g * h, g=g, h=h, distances=s.get("distances"))


def sc_gradient(table, alpha, keep_distances=False):
    """Evaluate ``SC`` together with its analytic gradient in ``alpha``.

    ``dg/dalpha_k = alpha_k / g * sum rho_ijk**2`` and
    ``dh/dalpha_k = -alpha_k * sum rho_ijk**2 / r_ij**3``.
    """
    alpha = _check_alpha(table, alpha)
    s = _pair_sums(table, alpha, True, keep_distances)
    g = float(np.sqrt(s["g_sq"]))
    h = float(s["h"])
    g_grad = alpha * s["rho_sum"] / g
    h_grad = -alpha * s["w_sum"]
    grad = g_grad * h + g * h_grad
    return ScEvaluation(
        sc=g * h, g=g, h=h, gradient=grad, g_grad=g_grad, h_grad=h_grad, distances=s.get("distances")
    )


def cases_c1_c2(table, alpha, tol=EQUILIBRIUM_TOL):
    """Classify each dimension by comparing ``g'_k/g`` against ``-h'_k/h``.

    Returns a list with ``"C1"`` where growing ``alpha_k`` stretches large
    distances relatively more, ``"C2"`` where it stretches small distances
    relatively more, and ``"equilibrium"`` where the two ratios agree within
    ``tol`` (relative to their magnitude).
    """
    ev = sc_gradient(table, alpha)
    up = ev.g_grad / ev.g
    down = -ev.h_grad / ev.h
    labels = []
    for a, b in zip(up, down):
        if abs(a - b) <= tol * max(abs(a), abs(b), np.finfo(float).tiny):
            labels.append("equilibrium")
        elif a > b:
            labels.append("C1")
        else:
            labels.append("C2")
    return labels
