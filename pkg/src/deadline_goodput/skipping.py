"""Single-flow overwrite queue with lead-time thresholding.

A buffered packet is only dispatched to the server while its lead-time
exceeds ``theta``; once the lead-time drops to ``theta`` it is discarded.
The flows of :class:`~deadline_goodput.core.ModelParams` are merged, so
``lam = lambda1 + lambda2`` is the arrival rate used throughout.
"""

from __future__ import annotations

from typing import Literal

import numpy as np

from ._numerics import as_scalar, int_exp, one_minus_exp
from .core import DomainError, ModelParams, validate


def _clearance_time(lam, mu, window):
    e = np.exp(-(lam + mu) * window)
    return one_minus_exp((lam + mu) * window) / (mu + lam * e)


def _prob_empty(lam, mu, window):
    e = np.exp(-(lam + mu) * window)
    num = lam * lam + lam * mu
    return 1.0 - num / (mu * mu + lam * mu * e + lam * lam + lam * mu)


def _busy_success(lam, mu, d, window):
    # P(success | arrival finds the server busy), clamped against rounding below zero
    return np.maximum(mu * int_exp(lam + mu, window) - mu * np.exp(-mu * d) * int_exp(lam, window), 0.0)


def _goodput(lam, mu, d, theta):
    lam = np.asarray(lam, dtype=float)
    window = np.asarray(d, dtype=float) - np.asarray(theta, dtype=float)
    p0 = _prob_empty(lam, mu, window)
    gamma = lam * p0 * one_minus_exp(mu * np.asarray(d, dtype=float)) + lam * (1.0 - p0) * _busy_success(
        lam, mu, d, window
    )
    return np.where(lam > 0, gamma, 0.0)


def expected_clearance_time(params: ModelParams) -> float:
    """Mean length of a buffer clearance period.

    The period ends when the buffered packet is dispatched or its lead-time
    reaches ``theta``; every arrival in between restarts it.
    """
    p = validate(params)
    return as_scalar(_clearance_time(p.lam, p.mu, p.window))


def expected_busy_period(params: ModelParams) -> float:
    p = validate(params)
    return 1.0 / p.mu + (p.lam / p.mu) * expected_clearance_time(p)


def prob_empty(params: ModelParams) -> float:
    """Probability that an arrival finds the system empty.

    Returns 1 when there is no traffic at all.
    """
    p = validate(params)
    if p.lam == 0:
        return 1.0
    return as_scalar(_prob_empty(p.lam, p.mu, p.window))


def prob_empty_renewal(params: ModelParams) -> float:
    """Same probability as :func:`prob_empty`, as mean idle time over mean cycle time."""
    p = validate(params)
    if p.lam == 0:
        return 1.0
    idle = 1.0 / p.lam
    return idle / (idle + expected_busy_period(p))


def goodput(params: ModelParams) -> float:
    """Long-run rate of packets whose service ends by their deadline."""
    p = validate(params)
    return as_scalar(_goodput(p.lam, p.mu, p.d, p.theta))


def goodput_curve(params: ModelParams, thetas) -> np.ndarray:
    """Goodput evaluated at every threshold in ``thetas`` (other parameters fixed)."""
    p = validate(params)
    thetas = np.asarray(thetas, dtype=float)
    if np.any(thetas < 0) or np.any(thetas > p.d):
        raise DomainError(f"thresholds must lie in [0, d={p.d}]")
    return np.asarray(_goodput(p.lam, p.mu, p.d, thetas))


def reference_goodput(kind: Literal["mm11", "mm12"], lam: float, mu: float) -> float:
    """Goodput of the deadline-free M/M/1/1 or M/M/1/2 loss queue."""
    # throughput is the service rate times the probability the server is busy
    if lam < 0 or mu <= 0:
        raise DomainError("need lam >= 0 and mu > 0")
    rho = lam / mu
    if kind == "mm12":
        return mu * (1.0 - 1.0 / (1.0 + rho + rho * rho))
    if kind == "mm11":
        return mu * (1.0 - 1.0 / (1.0 + rho))
    raise DomainError(f"unknown reference queue {kind!r}")
