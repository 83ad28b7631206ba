"""Norms of behavior: expected reward, expediency checks, convergence and summaries."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from lamm import kernels
from lamm.core import ConfigError, DimensionError, EnvironmentSpec, as_probabilities
from lamm.schemes import SchemeConfig


class UnsupportedSchemeError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


TARGETS = ("any", "optimal")


@dataclass(frozen=True)
class ConvergenceCriterion:
    threshold: float = 0.95
    target: str = "any"

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold", f"must be in (0, 1), got {self.threshold!r}")
        if self.target not in TARGETS:
            raise ConfigError("criterion.target", f"must be one of {TARGETS}, got {self.target!r}")

    @property
    def any_action(self) -> bool:
        return self.target == "any"


@dataclass(frozen=True)
class RunOutcome:
    converged_step: Optional[int]
    converged_action: Optional[int]
    correct: Optional[bool]
    final_expected_reward: float


@dataclass(frozen=True)
class ExperimentSummary:
    runs: int
    converged_fraction: float
    wrong_action_fraction: float
    median_step: Optional[float]
    mean_step: Optional[float]
    p10_step: Optional[float]
    p90_step: Optional[float]
    mean_final_expected_reward: float
    d_opt: float
    baseline_reward: float
    epsilon: float
    duration_seconds: float = 0.0

    def to_dict(self, include_duration: bool = False) -> dict:
        out = asdict(self)
        if not include_duration:
            del out["duration_seconds"]
        return out


def _rewards(env) -> np.ndarray:
    return env.d if isinstance(env, EnvironmentSpec) else np.asarray(env, dtype=np.float64)


def expected_reward(p, env) -> float:
    """M = sum_i p_i d_i."""
    p = np.asarray(p, dtype=np.float64)
    d = _rewards(env)
    if p.shape != d.shape:
        raise DimensionError(f"p has {p.shape[0]} actions, environment {d.shape[0]}")
    return float(p @ d)


def baseline_reward(env) -> float:
    """Average reward of the uniform automaton."""
    return float(np.mean(_rewards(env)))


def one_step_expected_reward(config, p, env, a: float = None, b: float = 0.0) -> float:
    """Exact E[M(n+1) | p(n) = p] by enumerating every (action, response) branch.

    ``config`` is a :class:`SchemeConfig` or a bare kind name with ``a``/``b``
    given directly (which also admits the degenerate zero step sizes).
    """
    if isinstance(config, SchemeConfig):
        kind, a, b = config.kind, config.a, config.b
    else:
        kind = config
    if kind not in ("LRI", "LRP", "LREP"):
        raise UnsupportedSchemeError(f"{kind} depends on count history, not on p alone")
    if kind == "LRI":
        b = 0.0
    p = as_probabilities(p)
    d = _rewards(env)
    if p.shape != d.shape:
        raise DimensionError(f"p has {p.shape[0]} actions, environment {d.shape[0]}")
    total = 0.0
    for i in range(p.shape[0]):
        for beta, weight in ((1, p[i] * d[i]), (0, p[i] * (1.0 - d[i]))):
            q = p.copy()
            kernels.lrp(q, i, beta, a, b)
            total += weight * float(q @ d)
    return total


def _series(trace) -> np.ndarray:
    # (N, r) array whose row n is p(n)
    if isinstance(trace, np.ndarray):
        return trace
    return np.vstack([trace.p0[None, :], trace.p])


def _step_index(trace, row: int) -> int:
    if isinstance(trace, np.ndarray) or row == 0:
        return row
    return int(trace.step[row - 1]) + 1


def detect_convergence(trace, criterion: ConvergenceCriterion, opt_index: int,
                       rewards=None) -> RunOutcome:
    """First step at which a tracked action probability reaches the threshold.

    ``trace`` is a :class:`~lamm.harness.RunTrace` or an (N, r) array of
    probability vectors p(0)..p(N-1). With a strided trace the answer is
    only as fine as the recorded steps. ``rewards`` (an environment or
    reward vector) fills in the final expected reward; NaN otherwise.
    """
    series = _series(trace)
    if series.shape[0] == 0:
        raise EmptyInputError("empty trace")
    final = float(series[-1] @ _rewards(rewards)) if rewards is not None else float("nan")
    for row in range(series.shape[0]):
        j = kernels.crossing(series[row], criterion.threshold, opt_index, criterion.any_action)
        if j >= 0:
            return RunOutcome(_step_index(trace, row), int(j), int(j) == opt_index, final)
    return RunOutcome(None, None, None, final)


def summarize(outcomes: Sequence[RunOutcome], env: EnvironmentSpec,
              duration: float = 0.0) -> ExperimentSummary:
    if len(outcomes) == 0:
        raise EmptyInputError("no run outcomes to summarize")
    n = len(outcomes)
    steps = np.array([o.converged_step for o in outcomes if o.converged_step is not None], dtype=np.float64)
    wrong = sum(1 for o in outcomes if o.converged_step is not None and not o.correct)
    mean_final = float(np.mean([o.final_expected_reward for o in outcomes]))
    if steps.size:
        median, mean = float(np.median(steps)), float(np.mean(steps))
        p10, p90 = (float(x) for x in np.percentile(steps, [10, 90]))
    else:
        median = mean = p10 = p90 = None
    return ExperimentSummary(
        runs=n,
        converged_fraction=steps.size / n,
        wrong_action_fraction=wrong / n,
        median_step=median,
        mean_step=mean,
        p10_step=p10,
        p90_step=p90,
        mean_final_expected_reward=mean_final,
        d_opt=env.d_opt,
        baseline_reward=baseline_reward(env),
        epsilon=env.d_opt - mean_final,
        duration_seconds=duration,
    )
