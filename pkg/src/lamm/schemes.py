"""Reinforcement schemes: linear reward-inaction/penalty, pursuit, and multiple models.

The direct schemes (LRI, LRP, LREP) carry only the action probability vector.
The estimator schemes (Pursuit, MultiFixed, MultiAdaptive) additionally keep
per-action attempt/reward counts and start with a forced round-robin phase so
every estimate is defined before the first probability update.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from lamm import kernels
from lamm.core import (
    ConfigError,
    EnvironmentSpec,
    NotInitializedError,
    RngStream,
    as_probabilities,
    uniform_probabilities,
)

KINDS = {
    "LRI": kernels.LRI,
    "LRP": kernels.LRP,
    "LREP": kernels.LREP,
    "Pursuit": kernels.PURSUIT,
    "MultiFixed": kernels.MULTIFIXED,
    "MultiAdaptive": kernels.MULTIADAPTIVE,
}
ESTIMATOR_KINDS = ("Pursuit", "MultiFixed", "MultiAdaptive")
DEFAULT_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


def _open_unit(key, x):
    if not 0.0 < x < 1.0:
        raise ConfigError(key, f"must be in (0, 1), got {x!r}")


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme kind plus its step sizes.

    ``model_grid`` is the fixed model bank for MultiFixed; for MultiAdaptive it
    optionally sets the initial model values (defaults to evenly spaced points
    in (0, 1)). ``gains`` are the MultiAdaptive per-model adaptation rates.
    """

    kind: str
    a: float = 0.015
    b: float = 0.0
    lam: float = 0.01
    model_grid: tuple[float, ...] = DEFAULT_GRID
    gains: tuple[float, ...] = (0.02, 0.1, 0.5)
    init_pulls: int = 1

    def __post_init__(self):
        object.__setattr__(self, "model_grid", tuple(float(q) for q in self.model_grid))
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {sorted(KINDS)}, got {self.kind!r}")
        if self.kind in ("LRI", "LRP", "LREP"):
            _open_unit("a", self.a)
        if self.kind in ("LRP", "LREP"):
            if not 0.0 <= self.b < 1.0:
                raise ConfigError("b", f"must be in [0, 1), got {self.b!r}")
        if self.kind == "LREP" and not self.b < self.a:
            raise ConfigError("b", f"LREP requires b < a, got b={self.b!r}, a={self.a!r}")
        if self.kind in ESTIMATOR_KINDS:
            _open_unit("lambda", self.lam)
            if self.init_pulls < 1:
                raise ConfigError("init_pulls", f"must be >= 1, got {self.init_pulls!r}")
        if self.kind == "MultiFixed":
            check_grid(self.model_grid)
        if self.kind == "MultiAdaptive":
            if not self.gains:
                raise ConfigError("gains", "need at least one model gain")
            for g in self.gains:
                if not 0.0 < g <= 1.0:
                    raise ConfigError("gains", f"each gain must be in (0, 1], got {g!r}")

    @property
    def code(self) -> int:
        return KINDS[self.kind]

    @property
    def is_estimator(self) -> bool:
        return self.kind in ESTIMATOR_KINDS

    def initial_estimates(self, r: int) -> np.ndarray:
        """(r, m) starting values of the MultiAdaptive model bank."""
        m = len(self.gains)
        if len(self.model_grid) == m:
            start = np.array(self.model_grid)
        else:
            start = np.arange(1, m + 1) / (m + 1)
        return np.tile(start, (r, 1))

    def init_length(self, r: int) -> int:
        return r * self.init_pulls if self.is_estimator else 0


def check_grid(grid) -> np.ndarray:
    q = np.asarray(grid, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] < 1:
        raise ConfigError("model_grid", "need at least one model")
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise ConfigError("model_grid", f"models must lie in (0, 1), got {q.tolist()}")
    if np.any(np.diff(q) <= 0.0):
        raise ConfigError("model_grid", f"models must be strictly increasing, got {q.tolist()}")
    return q


def grid_logs(grid) -> tuple[np.ndarray, np.ndarray]:
    q = check_grid(grid)
    return np.log(q), np.log1p(-q)


@dataclass
class SchemeState:
    p: np.ndarray
    attempts: np.ndarray
    reward_counts: np.ndarray
    estimates: Optional[np.ndarray] = None
    loglik: Optional[np.ndarray] = None
    step_index: int = 0

    @property
    def r(self) -> int:
        return self.p.shape[0]

    def copy(self) -> "SchemeState":
        return replace(
            self,
            p=self.p.copy(),
            attempts=self.attempts.copy(),
            reward_counts=self.reward_counts.copy(),
            estimates=None if self.estimates is None else self.estimates.copy(),
            loglik=None if self.loglik is None else self.loglik.copy(),
        )


def initial_state(config: SchemeConfig, r: int, p0=None) -> SchemeState:
    p = uniform_probabilities(r) if p0 is None else as_probabilities(p0)
    if p.shape[0] != r:
        raise ConfigError("p0", f"expected {r} probabilities, got {p.shape[0]}")
    state = SchemeState(p=p, attempts=np.zeros(r, np.int64), reward_counts=np.zeros(r, np.int64))
    if config.kind == "MultiAdaptive":
        state.estimates = config.initial_estimates(r)
        state.loglik = np.zeros_like(state.estimates)
    return state


@dataclass(frozen=True)
class StepRecord:
    step: int
    action: int
    response: int
    p_after: np.ndarray = field(repr=False)


def _check_action(action, r):
    if not 0 <= action < r:
        raise IndexError(f"action {action} out of range for {r} actions")


def _check_response(response):
    if response not in (0, 1):
        raise ValueError(f"response must be 0 or 1, got {response!r}")


def lri_update(p, action: int, response: int, a: float) -> np.ndarray:
    """Linear reward-inaction: on reward move ``p`` a step ``a`` toward the chosen action."""
    p = as_probabilities(p)
    _check_action(action, p.shape[0])
    _check_response(response)
    _open_unit("a", a)
    kernels.lri(p, action, response, a)
    return p


def lrp_update(p, action: int, response: int, a: float, b: float) -> np.ndarray:
    """Linear reward-penalty.

    A reward is the reward-inaction step with size ``a``. A penalty on action
    i scales p_i by (1 - b) and hands each other action b/(r - 1) on top of
    its own (1 - b) share. With ``b == 0`` this is exactly :func:`lri_update`.
    """
    p = as_probabilities(p)
    _check_action(action, p.shape[0])
    _check_response(response)
    _open_unit("a", a)
    if not 0.0 <= b < 1.0:
        raise ConfigError("b", f"must be in [0, 1), got {b!r}")
    kernels.lrp(p, action, response, a, b)
    return p


def _require_initialized(state: SchemeState):
    if np.any(state.attempts < 1):
        untried = np.flatnonzero(state.attempts < 1).tolist()
        raise NotInitializedError(f"actions {untried} have not been attempted yet")


def _check_step(lam):
    # the bare update rules accept the closed interval; configs are stricter
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("lambda", f"must be in [0, 1], got {lam!r}")


def _count(state, action, response):
    _check_action(action, state.r)
    _check_response(response)
    new = state.copy()
    new.attempts[action] += 1
    new.reward_counts[action] += response
    new.step_index += 1
    return new


def pursuit_update(state: SchemeState, action: int, response: int, lam: float) -> SchemeState:
    _require_initialized(state)
    _check_step(lam)
    new = _count(state, action, response)
    target = kernels.best_mean(new.attempts, new.reward_counts)
    kernels.pursue(new.p, target, lam)
    return new


def mfm_select(attempts, reward_counts, grid) -> tuple[np.ndarray, int]:
    """Pick the most likely grid model per action, then the action with the highest one.

    Returns the per-action model values and the selected action. Likelihoods
    are compared in log space; near-equal ones go to the lower grid index.
    """
    n = np.asarray(attempts, dtype=np.int64)
    n1 = np.asarray(reward_counts, dtype=np.int64)
    if n.shape != n1.shape:
        raise ValueError("attempts and reward_counts differ in shape")
    if np.any(n < 1):
        raise NotInitializedError(f"actions {np.flatnonzero(n < 1).tolist()} have not been attempted yet")
    if np.any(n1 < 0) or np.any(n1 > n):
        raise ValueError("reward counts must satisfy 0 <= n1 <= n")
    q = check_grid(grid)
    log_q, log_1q = grid_logs(q)
    qidx = np.zeros(n.shape[0], np.int64)
    selected = kernels.select_models(n, n1, log_q, log_1q, qidx)
    return q[qidx], int(selected)


def mfm_update(state: SchemeState, action: int, response: int, lam: float, grid) -> SchemeState:
    _require_initialized(state)
    _check_step(lam)
    new = _count(state, action, response)
    _, target = mfm_select(new.attempts, new.reward_counts, grid)
    kernels.pursue(new.p, target, lam)
    return new


def mam_update(state: SchemeState, action: int, response: int, lam: float, gains) -> SchemeState:
    """Multiple adaptive models (experimental).

    Every model of the chosen action is scored by the log-probability it gave
    the response, then moved toward the response at its own gain. Each action
    is represented by its best-scoring model, and ``p`` pursues the action
    whose representative is highest.
    """
    _require_initialized(state)
    _check_step(lam)
    new = _count(state, action, response)
    _adapt(new, action, response, gains)
    target = kernels.best_adaptive(new.estimates, new.loglik)
    kernels.pursue(new.p, target, lam)
    return new


def _adapt(state, action, response, gains):
    g = np.asarray(gains, dtype=np.float64)
    if state.estimates is None:
        state.estimates = np.tile(np.arange(1, g.shape[0] + 1) / (g.shape[0] + 1), (state.r, 1))
        state.loglik = np.zeros_like(state.estimates)
    if state.estimates.shape[1] != g.shape[0]:
        raise ConfigError("gains", f"expected {state.estimates.shape[1]} gains, got {g.shape[0]}")
    kernels.adapt_models(state.estimates, state.loglik, g, action, response)


def scheme_step(state: SchemeState, config: SchemeConfig, env: EnvironmentSpec,
                rng: RngStream) -> tuple[SchemeState, StepRecord]:
    """One interaction: choose, observe, update.

    Each step draws exactly two uniforms (action, then response). During the
    estimator warm-up the action is forced round-robin and the first draw is
    discarded, so the stream layout never depends on the phase.
    """
    if state.r != env.r:
        raise ConfigError("env.rewards", f"state has {state.r} actions, environment {env.r}")
    n = state.step_index
    u_action = rng.uniform()
    u_env = rng.uniform()
    warmup = n < config.init_length(env.r)
    action = n % env.r if warmup else int(kernels.sample_index(state.p, u_action))
    response = 1 if u_env < env.rewards[action] else 0

    kind = config.kind
    if kind == "LRI":
        new = _count(state, action, response)
        kernels.lri(new.p, action, response, config.a)
    elif kind in ("LRP", "LREP"):
        new = _count(state, action, response)
        kernels.lrp(new.p, action, response, config.a, config.b)
    elif warmup:
        new = _count(state, action, response)
        if kind == "MultiAdaptive":
            _adapt(new, action, response, config.gains)
    elif kind == "Pursuit":
        new = pursuit_update(state, action, response, config.lam)
    elif kind == "MultiFixed":
        new = mfm_update(state, action, response, config.lam, config.model_grid)
    else:
        new = mam_update(state, action, response, config.lam, config.gains)
    return new, StepRecord(n, action, response, new.p.copy())
