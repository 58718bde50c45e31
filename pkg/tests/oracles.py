"""Independent reference computations for the closed forms.

Nothing here imports the package's formulas: integrals are evaluated by
adaptive quadrature straight from their integrands, and clearance/busy
periods are sampled by Monte Carlo from the queue rules.
"""

import math

import numpy as np
from scipy import integrate

QUAD = dict(epsabs=1e-13, epsrel=1e-13, limit=400)


def quad(f, a, b):
    if b <= a:
        return 0.0
    value, _ = integrate.quad(f, a, b, **QUAD)
    return value


# -- single flow --------------------------------------------------------------


def clearance_time_quad(lam, mu, d, theta):
    """Solve the clearance-period renewal equation with quadrature coefficients."""
    s = lam + mu
    window = d - theta
    if window == 0:
        return 0.0
    no_event = window * math.exp(-s * window)
    served = quad(lambda t: mu * math.exp(-s * t) * t, 0, window)
    overwritten_time = quad(lambda t: lam * math.exp(-s * t) * t, 0, window)
    restart = quad(lambda t: lam * math.exp(-s * t), 0, window)
    return (no_event + served + overwritten_time) / (1.0 - restart)


def prob_empty_renewal(lam, mu, d, theta):
    idle = 1.0 / lam
    busy = 1.0 / mu + (lam / mu) * clearance_time_quad(lam, mu, d, theta)
    return idle / (idle + busy)


def goodput_quad(lam, mu, d, theta):
    """Goodput from the conditioning on the state seen by an arrival."""
    if lam == 0:
        return 0.0
    p0 = prob_empty_renewal(lam, mu, d, theta)
    p_service = 1.0 - math.exp(-mu * d)
    busy = quad(lambda t: mu * math.exp(-mu * t) * (1.0 - math.exp(-mu * (d - t))) * math.exp(-lam * t), 0, d - theta)
    return lam * p0 * p_service + lam * (1.0 - p0) * busy


# -- two flows ----------------------------------------------------------------


def success_busy_quad(l1, l2, mu, d, theta):
    f = lambda t: mu * math.exp(-mu * t) * math.exp(-l1 * t) * (1 + l2 * t) * math.exp(-l2 * t) * (1 - math.exp(-mu * (d - t)))
    return quad(f, 0, d - theta)


def success_full_other_quad(l1, l2, mu, d, theta):
    f = lambda t: mu * math.exp(-mu * t) * math.exp(-l1 * t) * math.exp(-l2 * t) * (1 - math.exp(-mu * (d - t)))
    return quad(f, 0, d - theta)


def coded_extension_quad(l1, l2, mu, d, theta):
    """Double integral over (residual service t, partner arrival tau)."""
    window = d - theta

    def inner(t):
        lo, hi = max(0.0, t - window), min(window, t)
        if hi <= lo:
            return 0.0
        # exactly one flow-2 arrival, inside (lo, hi); nothing else before t
        return l2 * (hi - lo) * math.exp(-(l1 + l2) * t)

    f = lambda t: mu * math.exp(-mu * t) * inner(t) * (1 - math.exp(-mu * (d - t)))
    return quad(f, window, d)


# -- Monte Carlo ----------------------------------------------------------------


def _coded_after(buffer_type, flow):
    # buffer_type: 1, 2 native, 3 coded; returns the unit left after a flow arrival
    other = np.where(flow == 1, 2, 1)
    return np.where(buffer_type == other, 3, flow)


def mc_clearance(l1, l2, mu, d, theta, first_type, n, rng):
    """Sample clearance periods started by a ``first_type`` unit.

    Returns per-sample cumulative occupancy by buffer type, shape ``(n, 3)``.
    """
    s = l1 + l2 + mu
    window = d - theta
    occ = np.zeros((n, 3))
    kind = np.full(n, first_type)
    alive = np.ones(n, dtype=bool)
    while alive.any():
        idx = np.flatnonzero(alive)
        tau = rng.exponential(1.0 / s, idx.size)
        timeout = tau >= window
        spent = np.where(timeout, window, tau)
        np.add.at(occ, (idx, kind[idx] - 1), spent)
        u = rng.random(idx.size) * s
        served = u < mu
        arrival1 = (u >= mu) & (u < mu + l1)
        ends = timeout | served
        alive[idx[ends]] = False
        cont = ~ends
        flows = np.where(arrival1, 1, 2)
        kind[idx[cont]] = _coded_after(kind[idx[cont]], flows[cont])
    return occ


def mc_busy_period(lam, mu, d, theta, n, rng):
    """Sample single-flow busy periods (overwrite buffer, threshold removal).

    Every event while the buffer is full either dispatches it or replaces
    it with a fresh packet, so only the time since the last arrival matters.
    """
    s = lam + mu
    window = d - theta
    length = np.zeros(n)
    full = np.zeros(n, dtype=bool)
    alive = np.ones(n, dtype=bool)
    while alive.any():
        idx = np.flatnonzero(alive)
        tau = rng.exponential(1.0 / s, idx.size)
        is_full = full[idx]
        expires = is_full & (tau >= window)
        length[idx] += np.where(expires, window, tau)
        served = rng.random(idx.size) < mu / s
        ev = ~expires
        alive[idx[ev & served & ~is_full]] = False
        # expiry or dispatch empties the buffer, an arrival fills it
        full[idx[expires | (ev & served)]] = False
        full[idx[ev & ~served]] = True
    return length
