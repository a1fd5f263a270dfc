"""Entropy-regularized MDP view of a flow DAG.

The construction: extend the DAG with an absorbing sink, give every
terminal state a single action into the sink, and pay log-space rewards
(log of the backward-policy probability on interior edges, log of the
terminal reward on the edge into the sink, zero at the sink itself).  With
regularization coefficient 1, the optimal soft policy of this MDP is
exactly the forward policy of the Markovian flow fixed by the backward
policy and the terminal rewards.
"""

from __future__ import annotations

import numpy as np

from .graphs import EnvGraph, InvalidStateError


class UniformBackward:
    """Backward policy that is uniform over each state's parents."""

    kind = "uniform"

    def prob(self, env: EnvGraph, s: int, s_next: int) -> float:
        if not env.has_edge(s, s_next):
            raise InvalidStateError(f"({s}, {s_next}) is not an edge")
        return 1.0 / env.num_parents(s_next)

    def log_prob(self, env: EnvGraph, s: int, s_next: int) -> float:
        return float(np.log(self.prob(env, s, s_next)))

    @staticmethod
    def _parent_counts(env: EnvGraph, s_next) -> np.ndarray:
        table = env.num_parents_table() if env.enumerable else None
        if table is not None:
            return table[np.asarray(s_next, dtype=np.int64)]
        return env.num_parents_batch(s_next)

    def prob_batch(self, env: EnvGraph, s, s_next) -> np.ndarray:
        """Edge validity is the caller's responsibility here."""
        return 1.0 / self._parent_counts(env, s_next).astype(float)

    def log_prob_batch(self, env: EnvGraph, s, s_next) -> np.ndarray:
        return -np.log(self._parent_counts(env, s_next).astype(float))

    def sample_parent(self, env: EnvGraph, s: int, rng: np.random.Generator) -> int:
        parents = env.parents(s)
        if not parents:
            raise InvalidStateError(f"state {s} has no parents")
        return parents[int(rng.integers(len(parents)))]


class SoftMdp:
    """The sink-extended MDP over ``env`` with a fixed backward policy.

    ``lambda_coef`` is the entropy coefficient the consumer intends to
    solve at; 1 recovers the unbiased sampler, and trainers that add a
    policy bonus to the target compensate with 1 / (1 - bonus weight).
    """

    def __init__(self, env: EnvGraph, backward=None, lambda_coef: float = 1.0):
        if lambda_coef <= 0:
            raise ValueError("lambda_coef must be positive")
        self.env = env
        self.backward = backward if backward is not None else UniformBackward()
        self.sink = env.num_states
        self.lambda_coef = float(lambda_coef)

    def reward(self, s: int, s_next: int) -> float:
        """Reward of an edge of the extended graph.

        Interior edge: log of the backward probability of its reversal.
        Terminal-to-sink edge: log of the terminal reward.  Sink self-loop:
        zero.  Anything else is rejected.
        """
        if s == self.sink:
            if s_next != self.sink:
                raise InvalidStateError("the sink only loops onto itself")
            return 0.0
        self.env.check_state(s)
        if self.env.is_terminal(s):
            if s_next != self.sink:
                raise InvalidStateError(
                    f"terminal state {s} has a single edge, into the sink"
                )
            return self.env.log_reward(s)
        if s_next == self.sink:
            raise InvalidStateError(f"state {s} is not terminal; cannot reach the sink")
        return self.backward.log_prob(self.env, s, s_next)

    def interior_log_pb(self, s, s_next) -> np.ndarray:
        """Batched interior-edge rewards; callers guarantee valid edges."""
        return self.backward.log_prob_batch(self.env, s, s_next)
