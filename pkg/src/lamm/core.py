"""Action probability vectors, P-model environments and random streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lamm import kernels

REWARD = 1
PENALTY = 0

SIMPLEX_TOL = 1e-9


class SimplexError(ValueError):
    """A probability vector is off the simplex."""


class ConfigError(ValueError):
    """An invalid parameter. ``key`` names the offending parameter."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


class NotInitializedError(RuntimeError):
    """An estimator scheme was updated before every action had been tried."""


class DimensionError(ValueError):
    pass


def as_probabilities(values: Sequence[float], tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate ``values`` as an action probability vector and return a float64 copy."""
    p = np.array(values, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise SimplexError(f"need a vector of at least 2 probabilities, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise SimplexError("probabilities must be finite")
    if p.min() < 0.0 or p.max() > 1.0:
        raise SimplexError(f"probabilities must lie in [0, 1], got {p.tolist()}")
    s = p.sum()
    if abs(s - 1.0) > tol:
        raise SimplexError(f"probabilities sum to {s!r}, not 1")
    return p


def uniform_probabilities(r: int) -> np.ndarray:
    return np.full(r, 1.0 / r)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Stationary P-model environment given by per-action reward probabilities."""

    rewards: tuple[float, ...]
    name: str = ""

    def __post_init__(self):
        d = tuple(float(x) for x in self.rewards)
        if len(d) < 1:
            raise ConfigError("env.rewards", "need at least one action")
        for x in d:
            if not 0.0 <= x <= 1.0:
                raise ConfigError("env.rewards", f"each reward probability must lie in [0, 1], got {x!r}")
        object.__setattr__(self, "rewards", d)

    @property
    def r(self) -> int:
        return len(self.rewards)

    @property
    def d(self) -> np.ndarray:
        return np.array(self.rewards, dtype=np.float64)

    @property
    def opt_index(self) -> int:
        # np.argmax returns the first maximum
        return int(np.argmax(self.d))

    @property
    def d_opt(self) -> float:
        return max(self.rewards)


class RngStream:
    """Single-owner deterministic uniform stream (PCG64 behind a SeedSequence)."""

    def __init__(self, master_seed: int, run_index: int = 0):
        if not 0 <= master_seed < 2**64:
            raise ConfigError("master_seed", f"must be a 64-bit unsigned integer, got {master_seed!r}")
        if run_index < 0:
            raise ConfigError("run_index", f"must be non-negative, got {run_index!r}")
        self.master_seed = int(master_seed)
        self.run_index = int(run_index)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.run_index,))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def uniform(self) -> float:
        return float(self._gen.random())

    def uniforms(self, size) -> np.ndarray:
        """Next ``size`` draws; identical to that many :meth:`uniform` calls in C order."""
        return self._gen.random(size)


def derive_stream(master_seed: int, run_index: int) -> RngStream:
    """Stream for replication ``run_index``; independent of how many others exist."""
    return RngStream(master_seed, run_index)


def sample_action(p, rng: RngStream) -> int:
    p = as_probabilities(p)
    return int(kernels.sample_index(p, rng.uniform()))


def environment_respond(env: EnvironmentSpec, action: int, rng: RngStream) -> int:
    if not 0 <= action < env.r:
        raise IndexError(f"action {action} out of range for {env.r} actions")
    return REWARD if rng.uniform() < env.rewards[action] else PENALTY
