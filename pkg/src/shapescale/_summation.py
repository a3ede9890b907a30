"""Compensated summation for long pair sums.

Pair sums over ``n(n-1)/2`` terms mix magnitudes that differ by many orders
(``r**-1`` and ``r**-3`` of near neighbours next to far pairs). The reduction
below is a pairwise tree in which every addition is an error-free
transformation (Knuth's TwoSum); the rounding errors are collected in a
second array and added back at the end. The result is as accurate as a
plain sum carried out in twice the working precision, and it is fully
vectorised so it costs a handful of numpy passes.

The reduction order depends only on the input length, so results are
bitwise reproducible.
"""

import numpy as np

__all__ = ["compensated_sum", "compensated_dot"]


def _two_sum(a, b):
    s = a + b
    bp = s - a
    err = (a - (s - bp)) + (b - bp)
    return s, err


def compensated_sum(values, axis=0):
    """Sum ``values`` along ``axis`` with error-free pairwise reduction.

    Parameters
    ----------
    values : array-like
        Real values. Any shape.
    axis : int, default=0
        Axis to reduce.

    Returns
    -------
    total : float or ndarray
        The compensated sum, with ``axis`` removed.
    """
    x = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = x.shape[0]
    if n == 0:
        total = np.zeros(x.shape[1:])
        return float(total) if total.ndim == 0 else total
    # zero-pad to a power of two so every level halves a contiguous block
    size = 1 << max(n - 1, 0).bit_length()
    if size != n:
        x = np.concatenate([x, np.zeros((size - n,) + x.shape[1:])], axis=0)
    correction = np.zeros(x.shape[1:])
    while size > 1:
        size //= 2
        s, err = _two_sum(x[:size], x[size:])
        # error terms are tiny relative to the total; a plain pairwise
        # numpy sum of them is accurate enough
        correction = correction + err.sum(axis=0)
        x = s
    total = np.asarray(x[0] + correction)
    return float(total) if total.ndim == 0 else total


def compensated_dot(weights, values, axis=0):
    """Compensated ``sum(weights * values)`` along ``axis``.

    ``weights`` broadcasts against ``values``; products are rounded once,
    only the accumulation is compensated.
    """
    return compensated_sum(np.asarray(weights) * np.asarray(values), axis=axis)
