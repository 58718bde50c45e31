"""Replicated discrete-event simulation of the router.

Each replication gets its own child of a :class:`numpy.random.SeedSequence`
and, inside it, one independent stream per stochastic role (flow-1
interarrivals, flow-2 interarrivals, service times).  A flow with zero rate
consumes no draws, so policies can be compared under common random numbers.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Iterator

import numpy as np

from ..core import ModelParams, validate
from . import _kernel as K

log = logging.getLogger(__name__)

Z99 = NormalDist().inv_cdf(0.995)

COUNTER_NAMES = ("arrivals", "on_time", "late", "overwritten", "skipped", "coded", "in_system")
EVENT_NAMES = ("arrival1", "arrival2", "completion", "expiry")
ACTION_NAMES = ("serve", "buffer", "code", "overwrite", "dispatch", "idle", "remove")
STATE_LABELS = ("L0", "L1", "L2N1", "L2N2", "L2N3")


class ConfigError(ValueError):
    """Invalid simulation configuration."""


class Policy(enum.Enum):
    BASE_OVERWRITE = "base"
    SKIPPING = "skipping"
    CODING = "coding"
    CODING_SKIPPING = "joint"

    @property
    def codes(self) -> bool:
        return self in (Policy.CODING, Policy.CODING_SKIPPING)

    @property
    def thresholds(self) -> bool:
        return self in (Policy.SKIPPING, Policy.CODING_SKIPPING)

    def effective_theta(self, params: ModelParams) -> float:
        # threshold-free policies still drop a buffered unit once its deadline passes
        return params.theta if self.thresholds else 0.0


@dataclass(frozen=True)
class SimConfig:
    seed: int = 12345
    arrivals_target: int = 100_000
    warmup_arrivals: int | None = None  # default: 10% of arrivals_target
    replications: int = 1
    workers: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.arrivals_target < 1:
            raise ConfigError("arrivals_target must be at least 1")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.warmup_arrivals is not None and self.warmup_arrivals < 0:
            raise ConfigError("warmup_arrivals must be nonnegative")
        if self.arrivals_target < 1000:
            warnings.warn("arrivals_target below 1000: confidence intervals are unreliable", stacklevel=3)

    @property
    def warmup(self) -> int:
        if self.warmup_arrivals is None:
            return self.arrivals_target // 10
        return self.warmup_arrivals


@dataclass(frozen=True)
class RunResult:
    """Outcome of one replication."""

    goodput: tuple[float, float]
    state_time_fractions: tuple[float, ...]
    arrival_seen_fractions: tuple[float, ...]
    counts: dict[str, tuple[int, int]]
    elapsed: float
    n_events: int
    trace: np.ndarray | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class SimEstimate:
    goodput_flow1: float
    goodput_flow2: float
    ci_halfwidth_flow1: float
    ci_halfwidth_flow2: float
    state_time_fractions: tuple[float, ...]
    arrival_seen_fractions: tuple[float, ...]
    counts: dict[str, tuple[int, int]]
    replications: int
    samples_flow1: tuple[float, ...]
    samples_flow2: tuple[float, ...]

    @property
    def goodput_total(self) -> float:
        return self.goodput_flow1 + self.goodput_flow2

    def stderr(self, flow: int) -> float:
        samples = self.samples_flow1 if flow == 1 else self.samples_flow2
        if len(samples) < 2:
            return math.nan
        return float(np.std(samples, ddof=1) / math.sqrt(len(samples)))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _streams(seed: int, replications: int) -> list[list[np.random.SeedSequence]]:
    root = np.random.SeedSequence(int(seed))
    return [child.spawn(3) for child in root.spawn(replications)]


def _draw_sizes(params: ModelParams, n_total: int, slack: int) -> tuple[int, int, int]:
    lam = params.lam
    sizes = []
    for rate in (params.lambda1, params.lambda2):
        if rate <= 0:
            sizes.append(0)
            continue
        expected = n_total * rate / lam
        sizes.append(int(expected + 8 * math.sqrt(expected) + slack))
    sizes.append(int(n_total + 8 * math.sqrt(n_total) + slack))
    return tuple(sizes)


def simulate_once(
    params: ModelParams,
    policy: Policy,
    seeds: list[np.random.SeedSequence],
    arrivals_target: int,
    warmup: int,
    *,
    trace_capacity: int = 0,
    max_events: int = 0,
) -> RunResult:
    """One replication; ``seeds`` holds the flow-1, flow-2 and service stream seeds.

    With ``max_events > 0`` the run stops after that many events even if
    counted packets are still in the system (reported as ``in_system``).
    """
    p = validate(params)
    if p.lam <= 0:
        raise ConfigError("simulation needs a positive total arrival rate")
    n_total = warmup + arrivals_target + 1
    slack = 1000
    while True:
        sizes = _draw_sizes(p, n_total, slack)
        # fresh generators each attempt so a retry replays the same prefix
        gens = [np.random.Generator(np.random.PCG64(s)) for s in seeds]
        ia1, ia2, svc = (g.standard_exponential(n) for g, n in zip(gens, sizes))
        trace = np.zeros((trace_capacity, K.TRACE_COLUMNS))
        status, counts, state_time, seen, t_start, t_end, n_events, n_trace = K.simulate(
            float(p.lambda1),
            float(p.lambda2),
            float(p.mu),
            float(p.d),
            float(policy.effective_theta(p)),
            policy.codes,
            ia1,
            ia2,
            svc,
            int(warmup),
            int(arrivals_target),
            trace,
            int(max_events),
        )
        if status != K.STATUS_EXHAUSTED:
            break
        slack *= 4
        log.debug("random draws exhausted, retrying with slack %d", slack)

    elapsed = t_end - t_start
    total_time = state_time.sum()
    fractions = tuple(float(x) for x in state_time / total_time) if total_time > 0 else (math.nan,) * 5
    n_seen = seen.sum()
    seen_fr = tuple(float(x) for x in seen / n_seen) if n_seen > 0 else (math.nan,) * 5
    goodput = tuple(float(c) / elapsed if elapsed > 0 else math.nan for c in counts[:, K.ON_TIME])
    return RunResult(
        goodput=goodput,
        state_time_fractions=fractions,
        arrival_seen_fractions=seen_fr,
        counts={name: (int(counts[0, i]), int(counts[1, i])) for i, name in enumerate(COUNTER_NAMES)},
        elapsed=float(elapsed),
        n_events=int(n_events),
        trace=trace[:n_trace] if trace_capacity else None,
    )


def _aggregate(runs: list[RunResult]) -> SimEstimate:
    g1 = np.array([r.goodput[0] for r in runs])
    g2 = np.array([r.goodput[1] for r in runs])
    n = len(runs)

    def halfwidth(x: np.ndarray) -> float:
        if n < 2:
            return math.nan
        return float(Z99 * np.std(x, ddof=1) / math.sqrt(n))

    def mean_tuple(attr: str) -> tuple[float, ...]:
        return tuple(float(v) for v in np.mean([getattr(r, attr) for r in runs], axis=0))

    counts = {
        name: (sum(r.counts[name][0] for r in runs), sum(r.counts[name][1] for r in runs)) for name in COUNTER_NAMES
    }
    return SimEstimate(
        goodput_flow1=float(g1.mean()),
        goodput_flow2=float(g2.mean()),
        ci_halfwidth_flow1=halfwidth(g1),
        ci_halfwidth_flow2=halfwidth(g2),
        state_time_fractions=mean_tuple("state_time_fractions"),
        arrival_seen_fractions=mean_tuple("arrival_seen_fractions"),
        counts=counts,
        replications=n,
        samples_flow1=tuple(float(x) for x in g1),
        samples_flow2=tuple(float(x) for x in g2),
    )


def _run_all(params: ModelParams, policy: Policy, config: SimConfig) -> list[RunResult]:
    streams = _streams(config.seed, config.replications)

    def one(seeds: list[np.random.SeedSequence]) -> RunResult:
        return simulate_once(params, policy, seeds, config.arrivals_target, config.warmup)

    workers = config.workers or min(config.replications, 8)
    if workers <= 1 or config.replications == 1:
        return [one(g) for g in streams]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, streams))


def run(params: ModelParams, policy: Policy, config: SimConfig) -> SimEstimate:
    """Simulate ``config.replications`` independent runs and aggregate them.

    Confidence half-widths are NaN for a single replication.
    """
    validate(params)
    return _aggregate(_run_all(params, policy, config))


def replicate(params: ModelParams, policy: Policy, config: SimConfig) -> SimEstimate:
    """Like :func:`run` but insists on at least two replications for the CI."""
    if config.replications < 2:
        raise ConfigError("confidence intervals need at least 2 replications")
    return run(params, policy, config)


def trace_run(
    params: ModelParams, policy: Policy, seed: int, n_events: int, warmup: int = 0
) -> RunResult:
    """Single replication that records every event (up to ``n_events``)."""
    return simulate_once(
        params, policy, _streams(seed, 1)[0], arrivals_target=n_events, warmup=warmup, trace_capacity=n_events, max_events=n_events
    )


def format_trace(trace: np.ndarray) -> Iterator[str]:
    """One text line per event: time, kind, state before and after, action."""
    for row in trace:
        line = (
            f"{row[0]:.9f} {EVENT_NAMES[int(row[1])]} {STATE_LABELS[int(row[2])]}->{STATE_LABELS[int(row[3])]} "
            f"{ACTION_NAMES[int(row[4])]}"
        )
        if not math.isnan(row[5]):
            line += f" lead={row[5]:.9f}"
        yield line
