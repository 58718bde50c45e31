"""Parameter sweeps, the maximal-gain table and simulation cross-checks.

Everything here returns plain rows (dicts keyed by CSV column) so the CLI
and the tests share one code path.  Numbers are written with six
significant digits.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import coding, skipping
from .core import DomainError, ModelParams, relative_gain
from .optimizer import additional_gain, optimal_threshold
from .simulator import Policy, SimConfig, replicate
from .simulator.engine import Z99

log = logging.getLogger(__name__)

MODELS = ("skipping", "coding", "joint", "base")
TABLE1_LAMBDAS = (0.5, 1.0, 2.0, 4.0, 8.0)
TABLE1_DEADLINES = (0.1, 0.2, 0.3, 0.4, 0.5)
TABLE1_COLUMNS = ("lambda", "d", "theta_star", "max_gain_percent")
SWEEP_COLUMNS = (
    "model",
    "lambda1",
    "lambda2",
    "mu",
    "d",
    "theta",
    "gamma_flow1",
    "gamma_flow2",
    "gamma_total",
    "gamma_base",
    "gain_percent",
)
VALIDATION_COLUMNS = ("policy", "lambda1", "lambda2", "mu", "d", "theta", "flow", "analytic", "simulated", "ci_halfwidth", "z", "passed")


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v == 0:
            return "0"
        return f"{v:.6g}"
    return str(value)


def write_csv(rows: Iterable[dict], columns: Sequence[str], out: str | Path | None = None) -> str:
    """Render rows as CSV; also write them to ``out`` when given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c, "")) for c in columns])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text


# -- ranges and experiment specs ---------------------------------------------


@dataclass(frozen=True)
class Range:
    start: float
    stop: float
    steps: int = 1

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise DomainError(f"range needs steps >= 1, got {self.steps}")
        if self.stop < self.start:
            raise DomainError(f"range stop {self.stop} is below start {self.start}")

    @classmethod
    def parse(cls, text) -> "Range":
        """``"x"`` (single value) or ``"start:stop:steps"``."""
        if isinstance(text, Range):
            return text
        if isinstance(text, (int, float)):
            return cls(float(text), float(text), 1)
        parts = str(text).split(":")
        try:
            if len(parts) == 1:
                v = float(parts[0])
                return cls(v, v, 1)
            if len(parts) == 3:
                return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise DomainError(f"cannot parse range {text!r}") from exc
        raise DomainError(f"range must be 'value' or 'start:stop:steps', got {text!r}")

    def values(self) -> list[float]:
        if self.steps == 1:
            return [self.start]
        return [float(v) for v in np.linspace(self.start, self.stop, self.steps)]


OPTIMAL = "opt"


@dataclass(frozen=True)
class ExperimentSpec:
    """A sweep grid.

    Either ``lam`` (total rate; split evenly for the two-flow models, all on
    flow 1 otherwise) or ``lambda1`` is given.  With ``lambda1`` the second
    flow comes from ``lambda2`` or, when ``total`` is set, ``total - lambda1``.
    ``theta = "opt"`` uses the optimal threshold at each point.
    """

    model: str = "skipping"
    lam: Range | None = None
    lambda1: Range | None = None
    lambda2: Range | None = None
    total: float | None = None
    d: Range = field(default_factory=lambda: Range(1.0, 1.0, 1))
    theta: Range | str = field(default_factory=lambda: Range(0.0, 0.0, 1))
    mu: float = 1.0
    resolution: float | None = None
    seed: int | None = None
    arrivals: int | None = None
    replications: int | None = None
    out: str | None = None

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise DomainError(f"model must be one of {MODELS}, got {self.model!r}")
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if self.lam is None and self.lambda1 is None:
            raise DomainError("give either lambda or lambda1")
        if self.lam is not None and (self.lambda1 is not None or self.lambda2 is not None):
            raise DomainError("lambda cannot be combined with lambda1/lambda2")
        if self.total is not None and self.lambda2 is not None:
            raise DomainError("total cannot be combined with lambda2")
        if isinstance(self.theta, str) and self.theta != OPTIMAL:
            raise DomainError(f"theta must be a range or {OPTIMAL!r}")
        if self.theta == OPTIMAL and self.model not in ("skipping", "joint"):
            raise DomainError("an optimal threshold only exists for the skipping and joint models")

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentSpec":
        """Build from flat key/value pairs (spec file or CLI flags)."""
        kw: dict = {}
        aliases = {"lambda": "lam"}
        for key, value in values.items():
            if value is None:
                continue
            key = aliases.get(key.replace("-", "_"), key.replace("-", "_"))
            if key in ("lam", "lambda1", "lambda2", "d"):
                kw[key] = Range.parse(value)
            elif key == "theta":
                kw[key] = OPTIMAL if str(value) == OPTIMAL else Range.parse(value)
            elif key in ("mu", "total", "resolution"):
                kw[key] = float(value)
            elif key in ("seed", "arrivals", "replications"):
                kw[key] = int(value)
            elif key in ("model", "out"):
                kw[key] = str(value)
            else:
                raise DomainError(f"unknown spec key {key!r}")
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path, overrides: dict | None = None) -> "ExperimentSpec":
        """Read a flat JSON object; ``overrides`` (e.g. CLI flags) win."""
        try:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DomainError(f"spec file {path} is not valid JSON: {exc}") from exc
        if not isinstance(values, dict) or any(isinstance(v, (dict, list)) for v in values.values()):
            raise DomainError("spec file must be a flat JSON object")
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(values)

    def rates(self) -> list[tuple[float, float]]:
        two_flow = self.model in ("coding", "joint")
        if self.lam is not None:
            if two_flow:
                return [(v / 2.0, v / 2.0) for v in self.lam.values()]
            return [(v, 0.0) for v in self.lam.values()]
        if self.total is not None:
            return [(v, self.total - v) for v in self.lambda1.values()]
        second = self.lambda2.values() if self.lambda2 is not None else [0.0]
        return list(itertools.product(self.lambda1.values(), second))

    def points(self) -> list[tuple[float, float, float, float | str]]:
        """Grid in deterministic order: rates outermost, then d, then theta."""
        thetas = [OPTIMAL] if self.theta == OPTIMAL else self.theta.values()
        out = []
        skipped = 0
        for (l1, l2), d, th in itertools.product(self.rates(), self.d.values(), thetas):
            if th != OPTIMAL and th > d:
                skipped += 1
                continue
            out.append((l1, l2, d, th))
        if skipped:
            log.warning("skipped %d grid points with theta > d", skipped)
        return out


# -- single-point evaluation -------------------------------------------------


def evaluate_point(model: str, lambda1: float, lambda2: float, mu: float, d: float, theta, resolution=None) -> dict:
    """Analytic goodputs and gains at one grid point.

    ``gamma_base`` is always the plain overwrite queue at the total rate
    with no threshold; gains of zero-traffic or zero-deadline points are 0.
    """
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")
    th0 = 0.0 if theta == OPTIMAL else float(theta)
    p = ModelParams(float(lambda1), float(lambda2), float(mu), float(d), th0)
    row = dict(model=model, lambda1=p.lambda1, lambda2=p.lambda2, mu=p.mu, d=p.d)
    if theta == OPTIMAL:
        kind = "skipping" if model == "skipping" else "joint"
        p = p.replace(theta=optimal_threshold(p, kind, resolution).theta_star)
    if model in ("coding", "base"):
        p = p.replace(theta=0.0)
    row["theta"] = p.theta
    if p.lam == 0:
        row.update(gamma_flow1=0.0, gamma_flow2=0.0, gamma_total=0.0, gamma_base=0.0, gain_percent=0.0)
        if model == "joint":
            row["additional_gain_percent"] = 0.0
        return row

    base = skipping.goodput(ModelParams.single(p.lam, p.mu, p.d, 0.0))
    if model in ("skipping", "base"):
        total = skipping.goodput(ModelParams.single(p.lam, p.mu, p.d, p.theta))
        g1, g2 = total * p.lambda1 / p.lam, total * p.lambda2 / p.lam
    else:
        g1, g2 = coding.flow_goodput(p, 1), coding.flow_goodput(p, 2)
        total = g1 + g2
    gain = relative_gain(total, base)
    row.update(gamma_flow1=g1, gamma_flow2=g2, gamma_total=total, gamma_base=base, gain_percent=100.0 * gain)
    if model == "joint":
        coded = coding.flow_goodput(p.replace(theta=0.0), 1) + coding.flow_goodput(p.replace(theta=0.0), 2)
        row["additional_gain_percent"] = 100.0 * (gain - relative_gain(coded, base))
    return row


def _evaluate_args(args):
    return evaluate_point(*args)


def sweep_rows(spec: ExperimentSpec, workers: int = 1) -> list[dict]:
    tasks = [(spec.model, l1, l2, spec.mu, d, th, spec.resolution) for l1, l2, d, th in spec.points()]
    if workers <= 1 or len(tasks) < 2:
        return [_evaluate_args(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_args, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def sweep_columns(spec: ExperimentSpec) -> tuple[str, ...]:
    return SWEEP_COLUMNS + (("additional_gain_percent",) if spec.model == "joint" else ())


def table1_rows(resolution: float | None = None) -> list[dict]:
    """Maximal skipping gain on the fixed (lambda, d) grid with mu = 1."""
    rows = []
    for lam in TABLE1_LAMBDAS:
        for d in TABLE1_DEADLINES:
            res = optimal_threshold(ModelParams.single(lam, 1.0, d), "skipping", resolution)
            rows.append({"lambda": lam, "d": d, "theta_star": res.theta_star, "max_gain_percent": res.gain_percent})
    return rows


def max_gain_surface(model: str, lambdas: Sequence[float], deadlines: Sequence[float], resolution=None) -> np.ndarray:
    """Maximal gain (fraction) on a ``lambdas x deadlines`` grid.

    ``"skipping"``: best-threshold gain of the single-flow queue.
    ``"joint"``: additional gain of skipping on top of coding, symmetric split.
    """
    out = np.zeros((len(lambdas), len(deadlines)))
    for i, lam in enumerate(lambdas):
        for j, d in enumerate(deadlines):
            if lam == 0 or d == 0:
                continue
            if model == "skipping":
                out[i, j] = optimal_threshold(ModelParams.single(lam, 1.0, d), "skipping", resolution).gain_at_star
            elif model == "joint":
                out[i, j] = additional_gain(ModelParams.symmetric(lam, 1.0, d), resolution)[1]
            else:
                raise DomainError(f"no maximal-gain surface for model {model!r}")
    return out


# -- simulation cross-checks -------------------------------------------------


@dataclass(frozen=True)
class OraclePoint:
    policy: Policy
    params: ModelParams


def _points(policy: Policy, triples) -> list[OraclePoint]:
    return [OraclePoint(policy, ModelParams(*t)) for t in triples]


GRIDS: dict[str, list[OraclePoint]] = {
    "coding": [
        OraclePoint(Policy.CODING, ModelParams.symmetric(lam, 1.0, d)) for lam in (0.5, 2.0, 8.0) for d in (0.2, 1.0, 5.0)
    ],
    "skipping": _points(Policy.SKIPPING, [(1.0, 0.0, 1.0, 1.0, th) for th in (0.0, 0.3, 0.6, 0.9)]),
    "oracle": (
        _points(Policy.BASE_OVERWRITE, [(1.0, 0.0, 1.0, 1e6, 0.0), (4.0, 0.0, 1.0, 0.3, 0.0), (1.5, 0.5, 1.0, 1.0, 0.0)])
        + _points(Policy.SKIPPING, [(1.0, 0.0, 1.0, 1.0, 0.3), (4.0, 0.0, 1.0, 0.3, 0.1), (2.0, 0.0, 1.0, 0.5, 0.25)])
        + _points(Policy.CODING, [(1.0, 1.0, 1.0, 1.0, 0.0), (2.5, 2.5, 1.0, 1.0, 0.0), (2.0, 1.0, 1.0, 2.0, 0.0)])
        + _points(Policy.CODING_SKIPPING, [(1.0, 1.0, 1.0, 1.0, 0.2), (2.0, 2.0, 1.0, 0.5, 0.2), (4.0, 4.0, 1.0, 0.3, 0.1)])
    ),
}


def analytic_flow_goodputs(policy: Policy, params: ModelParams, *, extended: bool = False) -> tuple[float, float]:
    """Analytic counterpart of a simulated policy, per flow."""
    p = params
    if policy in (Policy.BASE_OVERWRITE, Policy.SKIPPING):
        theta = p.theta if policy is Policy.SKIPPING else 0.0
        total = skipping.goodput(ModelParams.single(p.lam, p.mu, p.d, theta))
        return total * p.lambda1 / p.lam, total * p.lambda2 / p.lam
    q = p if policy is Policy.CODING_SKIPPING else p.replace(theta=0.0)
    return coding.flow_goodput(q, 1, extended=extended), coding.flow_goodput(q, 2, extended=extended)


def validate_points(
    points: Sequence[OraclePoint],
    config: SimConfig,
    *,
    extended: bool = False,
    corrupt: float | None = None,
) -> list[dict]:
    """Simulate every point and compare each active flow with the model.

    A flow passes when the analytic value lies inside the simulated 99%
    confidence interval.  ``corrupt`` scales the analytic values (harness
    sensitivity check).
    """
    if config.replications < 2:
        raise DomainError("validation needs at least 2 replications")
    rows = []
    for pt in points:
        est = replicate(pt.params, pt.policy, config)
        analytic = analytic_flow_goodputs(pt.policy, pt.params, extended=extended)
        for flow, rate in ((1, pt.params.lambda1), (2, pt.params.lambda2)):
            if rate == 0:
                continue
            a = analytic[flow - 1] * (corrupt if corrupt is not None else 1.0)
            sim = est.goodput_flow1 if flow == 1 else est.goodput_flow2
            half = est.ci_halfwidth_flow1 if flow == 1 else est.ci_halfwidth_flow2
            se = est.stderr(flow)
            z = (sim - a) / se if se > 0 else (0.0 if sim == a else math.inf)
            p = pt.params
            rows.append(
                dict(
                    policy=pt.policy.value,
                    lambda1=p.lambda1,
                    lambda2=p.lambda2,
                    mu=p.mu,
                    d=p.d,
                    theta=pt.policy.effective_theta(p),
                    flow=flow,
                    analytic=a,
                    simulated=sim,
                    ci_halfwidth=half,
                    z=z,
                    passed=bool(abs(z) <= Z99),
                )
            )
    return rows


def with_sim_options(config: SimConfig, seed=None, arrivals=None, replications=None) -> SimConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if arrivals is not None:
        changes["arrivals_target"] = arrivals
    if replications is not None:
        changes["replications"] = replications
    return replace(config, **changes) if changes else config
