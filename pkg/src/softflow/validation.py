"""Input validation helpers shared by the estimator-style trainers."""

from __future__ import annotations

import numpy as np

from .graphs import EnvGraph, ensure_enumerable


def check_env(env, enumerable: bool = False) -> EnvGraph:
    """Verify the object exposes the DAG interface trainers rely on."""
    required = ("num_states", "num_actions", "initial_state", "encoding_dim")
    for attr in required:
        if not hasattr(env, attr):
            raise TypeError(f"environment lacks required attribute {attr!r}")
    for method in ("children", "parents", "is_terminal", "reward", "encode"):
        if not callable(getattr(env, method, None)):
            raise TypeError(f"environment lacks required method {method!r}")
    if enumerable:
        ensure_enumerable(env)
    return env


def check_positive(name: str, value, strict: bool = True):
    if strict and not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


def check_unit_interval(name: str, value, include_one: bool = False):
    top = 1.0 + 1e-15 if include_one else 1.0
    if not 0.0 <= value < top:
        bound = "[0, 1]" if include_one else "[0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {value}")
    return value


def check_rng(rng, fallback_seed: int = 0) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng(fallback_seed)
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng))
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be None, an int seed, or a numpy Generator")
