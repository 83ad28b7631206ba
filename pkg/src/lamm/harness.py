"""Replicated Monte Carlo runs and the benchmark presets."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from lamm import kernels
from lamm.core import ConfigError, EnvironmentSpec, derive_stream, uniform_probabilities
from lamm.metrics import ConvergenceCriterion, ExperimentSummary, RunOutcome, summarize
from lamm.schemes import SchemeConfig, StepRecord, grid_logs


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvironmentSpec
    scheme: SchemeConfig
    steps: int = 5000
    runs: int = 200
    master_seed: int = 0
    criterion: ConvergenceCriterion = field(default_factory=ConvergenceCriterion)
    record_stride: int = 10
    stop_at_convergence: bool = False

    def __post_init__(self):
        for key in ("steps", "runs", "record_stride"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(key, f"must be an integer >= 1, got {v!r}")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, (int, np.integer)) \
                or not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed", f"must be a 64-bit unsigned integer, got {self.master_seed!r}")

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass
class RunTrace:
    """Recorded sample path of one run, stored column-wise.

    Row k holds the step index n, the action chosen at n, the response, and
    p(n+1). Rows are every ``record_stride`` steps plus the final step.
    """

    run_index: int
    p0: np.ndarray
    step: np.ndarray
    action: np.ndarray
    response: np.ndarray
    p: np.ndarray
    outcome: RunOutcome
    attempts: np.ndarray = None
    reward_counts: np.ndarray = None

    def __len__(self):
        return self.step.shape[0]

    @property
    def records(self) -> list[StepRecord]:
        return [StepRecord(int(n), int(i), int(b), self.p[k].copy())
                for k, (n, i, b) in enumerate(zip(self.step, self.action, self.response))]

    def p_opt(self, opt_index: int) -> np.ndarray:
        return self.p[:, opt_index]


def _record_count(steps: int, stride: int) -> int:
    last = steps - 1
    return last // stride + 1 + (1 if last % stride else 0)


def run_single(config: ExperimentConfig, run_index: int) -> RunTrace:
    """Simulate replication ``run_index``; depends only on (config, run_index)."""
    env, scheme = config.env, config.scheme
    r = env.r
    rng = derive_stream(config.master_seed, run_index)
    uniforms = rng.uniforms((config.steps, 2))

    p0 = uniform_probabilities(r)
    p = p0.copy()
    if scheme.kind == "MultiFixed":
        log_q, log_1q = grid_logs(scheme.model_grid)
    else:
        log_q = log_1q = np.zeros(1)
    if scheme.kind == "MultiAdaptive":
        gains = np.array(scheme.gains)
        est = scheme.initial_estimates(r)
    else:
        gains = np.zeros(1)
        est = np.zeros((r, 1))

    n_rec = _record_count(config.steps, config.record_stride)
    rec_step = np.empty(n_rec, np.int64)
    rec_action = np.empty(n_rec, np.int64)
    rec_response = np.empty(n_rec, np.int64)
    rec_p = np.empty((n_rec, r))

    conv_step, conv_action, w, attempts, rewards = kernels.simulate(
        scheme.code, p, env.d, uniforms, scheme.a, scheme.b, scheme.lam,
        log_q, log_1q, gains, est, scheme.init_length(r),
        config.criterion.threshold, env.opt_index, config.criterion.any_action,
        config.stop_at_convergence, config.record_stride,
        rec_step, rec_action, rec_response, rec_p)

    final = float(p @ env.d)
    if conv_step >= 0:
        outcome = RunOutcome(int(conv_step), int(conv_action), int(conv_action) == env.opt_index, final)
    else:
        outcome = RunOutcome(None, None, None, final)
    return RunTrace(run_index, p0, rec_step[:w], rec_action[:w], rec_response[:w], rec_p[:w],
                    outcome, attempts, rewards)


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   keep_traces: bool = True) -> tuple[ExperimentSummary, list[RunTrace]]:
    """Run replications 0..runs-1 and aggregate them in run-index order.

    Results do not depend on ``workers``: every run draws from its own stream
    derived from (master_seed, run_index). With ``keep_traces=False`` only the
    outcomes survive (the returned traces have no records).
    """
    if workers < 1:
        raise ConfigError("workers", f"must be >= 1, got {workers!r}")
    start = time.perf_counter()

    def one(k):
        try:
            trace = run_single(config, k)
        except Exception as exc:
            raise RuntimeError(f"run {k} failed: {exc}") from exc
        if not keep_traces:
            empty = np.empty(0, np.int64)
            trace = RunTrace(k, trace.p0, empty, empty, empty, np.empty((0, config.env.r)),
                             trace.outcome, trace.attempts, trace.reward_counts)
        return trace

    if workers == 1:
        traces = [one(k) for k in range(config.runs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, range(config.runs)))
    duration = time.perf_counter() - start
    summary = summarize([t.outcome for t in traces], config.env, duration)
    return summary, traces


B2 = EnvironmentSpec((0.7, 0.4), name="B2")
B10 = EnvironmentSpec((0.8, 0.6, 0.55, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2), name="B10")
HORIZON = {"B2": 5000, "B10": 20000}


def benchmark_registry() -> dict[str, ExperimentConfig]:
    """Named presets: ``<environment>-<scheme>``.

    B2 and B10 reward probabilities are chosen here, not taken from any
    published run: they put LRI at a=0.015 in the hundreds (B2) and
    thousands (B10) of steps to converge.
    """
    schemes = {
        "LRI": SchemeConfig("LRI", a=0.015),
        "LRP": SchemeConfig("LRP", a=0.015, b=0.005),
        "LREP": SchemeConfig("LREP", a=0.015, b=0.005),
        "Pursuit": SchemeConfig("Pursuit", lam=0.01),
        # calibrated: at equal lambda MultiFixed only matches Pursuit's median
        "MultiFixed": SchemeConfig("MultiFixed", lam=0.015),
        "MultiAdaptive": SchemeConfig("MultiAdaptive", lam=0.01),
    }
    presets = {}
    for env in (B2, B10):
        for name, scheme in schemes.items():
            presets[f"{env.name}-{name}"] = ExperimentConfig(
                env=env, scheme=scheme, steps=HORIZON[env.name], runs=200)
    return presets


def get_preset(name: str) -> ExperimentConfig:
    registry = benchmark_registry()
    try:
        return registry[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; valid presets: {', '.join(sorted(registry))}") from None
