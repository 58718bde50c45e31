"""Shared value types for the deadline-constrained overwrite queue.

Every model in the package consumes a :class:`ModelParams` tuple
``(lambda1, lambda2, mu, d, theta)``: two Poisson arrival rates, an
exponential service rate, a fixed relative deadline and a lead-time
threshold.  Single-flow analyses set ``lambda2 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Parameters outside the admissible region of the models."""


@dataclass(frozen=True)
class ModelParams:
    lambda1: float
    lambda2: float = 0.0
    mu: float = 1.0
    d: float = 1.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        _check(self)

    @classmethod
    def single(cls, lam: float, mu: float = 1.0, d: float = 1.0, theta: float = 0.0) -> "ModelParams":
        """Single-flow parameters (all traffic on flow 1)."""
        return cls(lam, 0.0, mu, d, theta)

    @classmethod
    def symmetric(cls, lam: float, mu: float = 1.0, d: float = 1.0, theta: float = 0.0) -> "ModelParams":
        """Total rate ``lam`` split evenly over the two flows."""
        return cls(lam / 2.0, lam / 2.0, mu, d, theta)

    @property
    def lam(self) -> float:
        """Total arrival rate of the merged stream."""
        return self.lambda1 + self.lambda2

    @property
    def rho(self) -> float:
        return (self.lambda1 + self.lambda2) / self.mu

    @property
    def window(self) -> float:
        """Usable lead-time window ``d - theta``."""
        return self.d - self.theta

    def replace(self, **changes: float) -> "ModelParams":
        values = dict(lambda1=self.lambda1, lambda2=self.lambda2, mu=self.mu, d=self.d, theta=self.theta)
        values.update(changes)
        return ModelParams(**values)

    def swapped(self) -> "ModelParams":
        """Same system with the two flows relabelled."""
        return ModelParams(self.lambda2, self.lambda1, self.mu, self.d, self.theta)


def _check(p: ModelParams) -> None:
    for name in ("lambda1", "lambda2", "mu", "d", "theta"):
        value = getattr(p, name)
        if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
            raise DomainError(f"{name} must be a real number, got {value!r}")
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value!r}")
    if p.lambda1 < 0 or p.lambda2 < 0:
        raise DomainError(f"arrival rates must be nonnegative, got ({p.lambda1}, {p.lambda2})")
    if p.mu <= 0:
        raise DomainError(f"mu must be positive, got {p.mu}")
    if p.d < 0:
        raise DomainError(f"d must be nonnegative, got {p.d}")
    if not 0 <= p.theta <= p.d:
        raise DomainError(f"theta must lie in [0, d={p.d}], got {p.theta}")


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if admissible, raise :class:`DomainError` otherwise."""
    _check(params)
    return params


def require_traffic(params: ModelParams) -> None:
    if params.lam <= 0:
        raise DomainError("total arrival rate lambda1 + lambda2 must be positive")


@dataclass(frozen=True)
class StateDistribution:
    """Stationary probabilities of the five router states ``(L, N)``."""

    p_empty: float
    p_busy: float
    p_full_type1: float
    p_full_type2: float
    p_full_coded: float

    def __post_init__(self) -> None:
        values = self.as_tuple()
        if any(not (-1e-12 <= v <= 1 + 1e-12) for v in values):
            raise ValueError(f"state probabilities outside [0, 1]: {values}")
        if abs(math.fsum(values) - 1.0) > 1e-12:
            raise ValueError(f"state probabilities do not sum to 1: {values}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.p_empty, self.p_busy, self.p_full_type1, self.p_full_type2, self.p_full_coded)


STATE_NAMES = ("empty", "busy", "full_type1", "full_type2", "full_coded")


@dataclass(frozen=True)
class ClearanceExpectations:
    """``t[i][j]``: expected type-(i+1) buffer occupancy in a clearance period
    whose first arrival is of type j+1 (type 3 = coded)."""

    t: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if len(self.t) != 3 or any(len(row) != 3 for row in self.t):
            raise ValueError("clearance expectations must be a 3x3 table")
        if any(not (v >= 0 and math.isfinite(v)) for row in self.t for v in row):
            raise ValueError(f"clearance expectations must be finite and nonnegative: {self.t}")

    def __getitem__(self, ij: tuple[int, int]) -> float:
        """1-based access: ``ce[1, 3]`` is E[T_{1,3}]."""
        i, j = ij
        return self.t[i - 1][j - 1]

    def as_array(self) -> np.ndarray:
        return np.array(self.t, dtype=float)


@dataclass(frozen=True)
class GoodputReport:
    gamma_flow1: float
    gamma_flow2: float
    gamma_total: float
    gamma_base: float
    gain: float
    states: StateDistribution | None = field(default=None, compare=False)

    @property
    def gain_percent(self) -> float:
        return 100.0 * self.gain


def relative_gain(gamma: float, gamma_ref: float) -> float:
    """``(gamma - gamma_ref) / gamma_ref``; zero when the reference carries no traffic."""
    if gamma_ref <= 0:
        return 0.0
    return (gamma - gamma_ref) / gamma_ref
