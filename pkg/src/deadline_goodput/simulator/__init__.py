"""Discrete-event simulation oracle for the router models."""

from .engine import (
    COUNTER_NAMES,
    ConfigError,
    Policy,
    RunResult,
    SimConfig,
    SimEstimate,
    format_trace,
    replicate,
    run,
    simulate_once,
    trace_run,
)

__all__ = [
    "COUNTER_NAMES",
    "ConfigError",
    "Policy",
    "RunResult",
    "SimConfig",
    "SimEstimate",
    "format_trace",
    "replicate",
    "run",
    "simulate_once",
    "trace_run",
]
