"""Optimal lead-time threshold.

The gain curve ``theta -> (gamma(theta) - gamma(0)) / gamma(0)`` is not
known to be unimodal, so the search is exhaustive on a grid and only then
refined locally by golden-section search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from . import coding, skipping
from .core import DomainError, ModelParams, validate

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_DIVISIONS = 2000


@dataclass(frozen=True)
class ThresholdResult:
    theta_star: float
    gain_at_star: float
    grid_resolution: float

    @property
    def gain_percent(self) -> float:
        return 100.0 * self.gain_at_star


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Maximise ``f`` on ``[lo, hi]``; returns ``(x, f(x))`` of the best point probed."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    e = a + INV_PHI * (b - a)
    fc, fe = f(c), f(e)
    best = (c, fc) if fc >= fe else (e, fe)
    while b - a > tol:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            if fc > best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, e, fe
            e = a + INV_PHI * (b - a)
            fe = f(e)
            if fe > best[1]:
                best = (e, fe)
    return best


def _goodput_fn(params: ModelParams, model: str, extended: bool) -> Callable[[np.ndarray], np.ndarray]:
    if model == "skipping":
        return lambda thetas: skipping.goodput_curve(params, thetas)
    if model == "joint":
        return lambda thetas: coding.total_goodput_curve(params, thetas, extended=extended)
    raise DomainError(f"unknown model {model!r}; expected 'skipping' or 'joint'")


def optimal_threshold(
    params: ModelParams,
    model: Literal["skipping", "joint"] = "skipping",
    resolution: float | None = None,
    *,
    extended: bool = False,
) -> ThresholdResult:
    """Threshold maximising the relative goodput gain over ``theta = 0``.

    For ``model="joint"`` the reference is the coding-only goodput of the
    same two-flow system.  ``params.theta`` is ignored.  The default grid
    step is ``d / 2000``; ties go to the smaller threshold.
    """
    p = validate(params)
    if resolution is None:
        resolution = p.d / DEFAULT_DIVISIONS if p.d > 0 else 1.0
    if not resolution > 0:
        raise DomainError(f"resolution must be positive, got {resolution}")
    if p.d == 0 or p.lam == 0:
        return ThresholdResult(0.0, 0.0, resolution)

    curve = _goodput_fn(p.replace(theta=0.0), model, extended)
    n = int(math.floor(p.d / resolution + 1e-9))
    # n * resolution can round one ulp past d
    grid = np.minimum(np.arange(n + 1) * resolution, p.d)
    if grid[-1] < p.d:
        grid = np.append(grid, p.d)
    gammas = curve(grid)
    ref = gammas[0]
    if ref <= 0:
        return ThresholdResult(0.0, 0.0, resolution)
    gains = (gammas - ref) / ref
    k = int(np.argmax(gains))
    theta_star, best = float(grid[k]), float(gains[k])

    if len(grid) > 1:
        lo = float(grid[max(k - 1, 0)])
        hi = float(grid[min(k + 1, len(grid) - 1)])

        def gain(theta: float) -> float:
            return float((curve(np.array([theta]))[0] - ref) / ref)

        x, gx = golden_section_max(gain, lo, hi, resolution * 1e-3)
        if gx > best:
            theta_star, best = x, gx
    return ThresholdResult(theta_star, max(best, 0.0), resolution)


def additional_gain(params: ModelParams, resolution: float | None = None, *, extended: bool = False) -> tuple[float, float]:
    """Extra gain of adding skipping to coding, relative to the no-coding base.

    Returns ``(theta_star, gain(joint at theta_star) - gain(coding))``.
    """
    p = validate(params)
    res = optimal_threshold(p, "joint", resolution, extended=extended)
    if p.lam == 0 or p.d == 0:
        return res.theta_star, 0.0
    base = coding.base_goodput(p)
    if base <= 0:
        return res.theta_star, 0.0
    coded = coding.total_goodput_curve(p.replace(theta=0.0), np.array([0.0]), extended=extended)[0]
    # optimal_threshold's gain is relative to the coding-only goodput; rescale to the base
    return res.theta_star, float(res.gain_at_star * coded / base)
