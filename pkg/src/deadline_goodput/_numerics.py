"""Exponential integrals shared by the closed forms.

All helpers broadcast over numpy arrays.  ``exp`` of large negative
arguments underflows to exactly 0.0, which is what the limit tests with
``d ~ 1e9`` rely on.
"""

import math

import numpy as np

_SERIES_CUTOFF = 1.0
# (-1)^n (n-1) / n!  for n = 2..19
_Q_COEFFS = np.array([(-1) ** n * (n - 1) / math.factorial(n) for n in range(2, 20)])


def one_minus_exp(x):
    """``1 - exp(-x)`` without cancellation for small ``x``."""
    return -np.expm1(-np.asarray(x, dtype=float))


def int_exp(a, upper):
    """``int_0^upper exp(-a t) dt``; equals ``upper`` at ``a = 0``."""
    a = np.asarray(a, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = a * upper
    with np.errstate(divide="ignore", invalid="ignore"):
        general = one_minus_exp(x) / a
    return np.where(a > 0, general, upper)


def int_t_exp(a, upper):
    """``int_0^upper t exp(-a t) dt``; equals ``upper**2 / 2`` at ``a = 0``."""
    a = np.asarray(a, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = a * upper
    # (1 - e^-x (1 + x)) / x^2 via its power series near 0, directly elsewhere
    xs = np.where(x < _SERIES_CUTOFF, x, 0.0)
    q_small = np.polynomial.polynomial.polyval(xs, _Q_COEFFS)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q_large = (1.0 - np.exp(-x) * (1.0 + x)) / (x * x)
    q = np.where(x < _SERIES_CUTOFF, q_small, q_large)
    return upper * upper * q


def as_scalar(value):
    """Unwrap 0-d arrays into Python floats."""
    arr = np.asarray(value)
    return float(arr) if arr.ndim == 0 else arr
