"""Two-flow router with opportunistic XOR coding, optionally with skipping.

A native packet arriving while the buffer holds a native packet of the
other flow is XOR-combined with it; any other arrival to a full buffer
overwrites.  A coded unit expires with the later of its two native
deadlines, and each native is scored against its own deadline.  With
``theta > 0`` the lead-time threshold applies to the buffered unit as in
:mod:`deadline_goodput.skipping`; ``theta = 0`` is the coding-only model.

Flow-2 quantities are obtained by relabelling the flows
(:meth:`ModelParams.swapped`), so the two flows are symmetric by
construction.
"""

from __future__ import annotations

import numpy as np

from . import skipping
from ._numerics import as_scalar, int_exp, int_t_exp, one_minus_exp
from .core import (
    ClearanceExpectations,
    DomainError,
    GoodputReport,
    ModelParams,
    StateDistribution,
    relative_gain,
    require_traffic,
    validate,
)


class SingularSystem(ArithmeticError):
    """The clearance-expectation linear system could not be solved."""


# Type of the unit that restarts a clearance period when a flow-k packet
# arrives to a buffer whose first arrival was of type j (0: type-1, 1: type-2, 2: coded).
_NEXT_TYPE = ((0, 2), (2, 1), (0, 1))


def _as_flow(flow: int) -> int:
    if flow not in (1, 2):
        raise DomainError(f"flow must be 1 or 2, got {flow!r}")
    return flow


def _oriented(params: ModelParams, flow: int) -> ModelParams:
    return params if _as_flow(flow) == 1 else params.swapped()


# -- conditional success probabilities (flow 1 view; arrays broadcast) -------


def _success_empty(mu, d):
    return one_minus_exp(mu * np.asarray(d, dtype=float))


def _success_busy(l1, l2, mu, d, theta):
    lam = l1 + l2
    window = np.asarray(d, dtype=float) - theta
    late = mu * np.exp(-mu * np.asarray(d, dtype=float))
    # differences of nearly equal terms can round below zero for tiny windows
    return np.maximum(
        mu * (int_exp(lam + mu, window) + l2 * int_t_exp(lam + mu, window))
        - late * (int_exp(lam, window) + l2 * int_t_exp(lam, window)),
        0.0,
    )


def _success_full_other(l1, l2, mu, d, theta):
    lam = l1 + l2
    window = np.asarray(d, dtype=float) - theta
    late = mu * np.exp(-mu * np.asarray(d, dtype=float))
    return np.maximum(mu * int_exp(lam + mu, window) - late * int_exp(lam, window), 0.0)


def _coded_extension(l1, l2, mu, d, theta):
    # Extra success mass of a buffered flow-1 packet that is coded with a
    # later flow-2 packet and dispatched after its own lead-time fell below
    # theta (residual service t in (d - theta, min(d, 2(d - theta)))).
    lam = l1 + l2
    d = np.asarray(d, dtype=float)
    window = d - theta
    span = np.minimum(theta, window)
    on_time = np.exp(-(lam + mu) * window) * (window * int_exp(lam + mu, span) - int_t_exp(lam + mu, span))
    late = np.exp(-mu * d - lam * window) * (window * int_exp(lam, span) - int_t_exp(lam, span))
    return np.maximum(mu * l2 * (on_time - late), 0.0)


def success_prob_empty(params: ModelParams) -> float:
    """Success probability of an arrival to an empty system: ``P(B <= d)``."""
    p = validate(params)
    return as_scalar(_success_empty(p.mu, p.d))


def success_prob_busy(params: ModelParams, flow: int = 1) -> float:
    """Success probability of a ``flow`` arrival that ends up alone in the buffer.

    Covers arrivals to a busy server with an empty buffer and arrivals that
    overwrite a same-flow or coded buffered unit.  The packet survives at
    most one arrival of the other flow (which codes with it) and none of
    its own flow, and must be dispatched within ``d - theta``.
    """
    p = _oriented(validate(params), flow)
    return as_scalar(_success_busy(p.lambda1, p.lambda2, p.mu, p.d, p.theta))


def success_prob_full_other(params: ModelParams, flow: int = 1) -> float:
    """Success probability of a ``flow`` arrival that codes with the buffered packet."""
    p = _oriented(validate(params), flow)
    return as_scalar(_success_full_other(p.lambda1, p.lambda2, p.mu, p.d, p.theta))


def coded_extension_prob(params: ModelParams, flow: int = 1) -> float:
    """Success mass missing from :func:`success_prob_busy` when ``theta > 0``.

    A buffered packet coded with a later arrival of the other flow inherits
    that arrival's deadline, so the coded unit may still be dispatched after
    the packet's own lead-time has dropped below ``theta``.  Zero at
    ``theta = 0`` and at ``theta = d``.
    """
    p = _oriented(validate(params), flow)
    return as_scalar(_coded_extension(p.lambda1, p.lambda2, p.mu, p.d, p.theta))


# -- clearance expectations and state distribution ---------------------------


def _clearance_matrix(l1, l2, mu, d, theta):
    """Batched ``E[T_{i,j}]`` with shape ``broadcast + (3, 3)``."""
    l1, l2, mu, d, theta = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (l1, l2, mu, d, theta)))
    s = l1 + l2 + mu
    alpha = one_minus_exp(s * (d - theta))
    rates = (l1, l2)
    a = np.zeros(l1.shape + (3, 3))
    for j in range(3):
        a[..., j, j] += 1.0
        for k in range(2):
            a[..., j, _NEXT_TYPE[j][k]] -= alpha * rates[k] / s
    rhs = (alpha / s)[..., None, None] * np.eye(3)
    try:
        x = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite clearance expectations")
    # column i of x solves the system for buffer type i; transpose to t[i, j]
    t = np.swapaxes(x, -1, -2)
    # exact zeros for alpha = 0 (theta = d) and clamp round-off below zero
    return np.where(alpha[..., None, None] > 0, np.maximum(t, 0.0), 0.0)


def clearance_matrix(params: ModelParams) -> ClearanceExpectations:
    """All nine ``E[T_{i,j}]`` values."""
    p = validate(params)
    t = _clearance_matrix(p.lambda1, p.lambda2, p.mu, p.d, p.theta)
    return ClearanceExpectations(tuple(tuple(float(v) for v in row) for row in t))


def clearance_expectations(params: ModelParams, flow_type: int) -> tuple[float, float, float]:
    """Row ``(E[T_{i,1}], E[T_{i,2}], E[T_{i,3}])`` for buffer type ``i = flow_type``."""
    if flow_type not in (1, 2, 3):
        raise DomainError(f"flow_type must be 1, 2 or 3, got {flow_type!r}")
    return clearance_matrix(params).t[flow_type - 1]


def _state_probs(l1, l2, mu, d, theta):
    """Batched state probabilities, last axis ordered as StateDistribution."""
    l1, l2, mu, d, theta = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (l1, l2, mu, d, theta)))
    lam = l1 + l2
    t = _clearance_matrix(l1, l2, mu, d, theta)
    clearance = skipping._clearance_time(lam, mu, d - theta)
    cycle = 1.0 / lam + 1.0 / mu + (lam / mu) * clearance
    full = (l1[..., None] * t[..., :, 0] + l2[..., None] * t[..., :, 1]) / mu[..., None] / cycle[..., None]
    empty = (1.0 / lam) / cycle
    busy = 1.0 - empty - full.sum(axis=-1)
    return np.concatenate([empty[..., None], busy[..., None], full], axis=-1)


def state_distribution(params: ModelParams) -> StateDistribution:
    p = validate(params)
    require_traffic(p)
    probs = _state_probs(p.lambda1, p.lambda2, p.mu, p.d, p.theta)
    return StateDistribution(*(float(v) for v in probs))


# -- goodput -----------------------------------------------------------------


def _flow1_goodput(l1, l2, mu, d, theta, extended=False):
    probs = _state_probs(l1, l2, mu, d, theta)
    s_busy = _success_busy(l1, l2, mu, d, theta)
    if extended:
        s_busy = s_busy + _coded_extension(l1, l2, mu, d, theta)
    s_empty = _success_empty(mu, d)
    s_other = _success_full_other(l1, l2, mu, d, theta)
    p0, p1, pf1, pf2, pf3 = (probs[..., k] for k in range(5))
    return l1 * (p0 * s_empty + (p1 + pf1 + pf3) * s_busy + pf2 * s_other)


def flow_goodput(params: ModelParams, flow: int = 1, *, extended: bool = False) -> float:
    """Goodput of one flow.

    ``extended=True`` adds :func:`coded_extension_prob` to the busy-arrival
    success probability, which only matters when ``theta > 0``.
    """
    p = _oriented(validate(params), flow)
    require_traffic(p)
    if p.lambda1 == 0:
        return 0.0
    return as_scalar(_flow1_goodput(p.lambda1, p.lambda2, p.mu, p.d, p.theta, extended))


def base_goodput(params: ModelParams) -> float:
    """No-coding, no-threshold goodput at the same total load."""
    p = validate(params)
    require_traffic(p)
    return flow_goodput(ModelParams(p.lam, 0.0, p.mu, p.d, 0.0), 1)


def goodput_report(params: ModelParams, *, extended: bool = False) -> GoodputReport:
    p = validate(params)
    require_traffic(p)
    g1 = flow_goodput(p, 1, extended=extended)
    g2 = flow_goodput(p, 2, extended=extended)
    total = g1 + g2
    base = base_goodput(p)
    return GoodputReport(g1, g2, total, base, relative_gain(total, base), state_distribution(p))


def total_goodput_curve(params: ModelParams, thetas, *, extended: bool = False) -> np.ndarray:
    """Total goodput for every threshold in ``thetas`` (other parameters fixed)."""
    p = validate(params)
    require_traffic(p)
    thetas = np.asarray(thetas, dtype=float)
    if np.any(thetas < 0) or np.any(thetas > p.d):
        raise DomainError(f"thresholds must lie in [0, d={p.d}]")
    total = np.zeros_like(thetas)
    for q in (p, p.swapped()):
        if q.lambda1 > 0:
            total = total + _flow1_goodput(q.lambda1, q.lambda2, q.mu, q.d, thetas, extended)
    return total
