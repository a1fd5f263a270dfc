"""Directed acyclic state graphs over dense integer state ids.

Every environment exposes the same view: states are integers, the initial
state has no incoming edges, terminal states carry a strictly positive
reward and have no outgoing edges, and each state's outgoing edges are
indexed by a small integer action in a canonical, reproducible order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

# Hard ceiling on the number of states any table-building routine will touch.
ENUMERATION_CAP = 10_000_000


class InvalidStateError(ValueError):
    """A state or action id outside the environment's domain."""


class CapacityError(RuntimeError):
    """The environment is too large for an exact / tabular operation."""


@dataclass(frozen=True)
class Trajectory:
    """A complete path from the initial state to a terminal state."""

    states: tuple[int, ...]
    actions: tuple[int, ...]

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("trajectory needs exactly one more state than actions")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def terminal(self) -> int:
        return self.states[-1]


class EnvGraph:
    """Base class for DAG environments.

    Subclasses fill in the structural queries below.  States are dense
    integers in ``[0, num_states)``; the id encoding is part of each
    environment's contract so that tables and one-hot encodings are O(1)
    lookups.  Instances are immutable after construction and safe for
    concurrent reads.
    """

    num_states: int
    num_actions: int
    initial_state: int = 0
    encoding_dim: int

    # -- structure ---------------------------------------------------------

    def is_terminal(self, s: int) -> bool:
        raise NotImplementedError

    def children(self, s: int) -> list[tuple[int, int]]:
        """All outgoing edges of ``s`` as (action, child), in canonical action order.

        Empty for terminal states.
        """
        raise NotImplementedError

    def parents(self, s: int) -> list[int]:
        """All incoming edges' sources. Empty for the initial state."""
        raise NotImplementedError

    def reward(self, s: int) -> float:
        """Terminal reward, strictly positive. Raises off the terminal set."""
        raise NotImplementedError

    def encode(self, s: int) -> np.ndarray:
        """Fixed-width float feature vector for function approximation."""
        raise NotImplementedError

    def terminal_states(self):
        """Iterator over the terminal set (enumerable environments only)."""
        ensure_enumerable(self)
        return (s for s in range(self.num_states) if self.is_terminal(s))

    # -- derived helpers ----------------------------------------------------

    def check_state(self, s: int) -> None:
        if not 0 <= s < self.num_states:
            raise InvalidStateError(f"state {s} outside [0, {self.num_states})")

    def child(self, s: int, a: int) -> int:
        for action, nxt in self.children(s):
            if action == a:
                return nxt
        raise InvalidStateError(f"action {a} invalid in state {s}")

    def valid_actions(self, s: int) -> list[int]:
        return [a for a, _ in self.children(s)]

    def has_edge(self, s: int, s_next: int) -> bool:
        self.check_state(s)
        self.check_state(s_next)
        return any(nxt == s_next for _, nxt in self.children(s))

    def num_parents(self, s: int) -> int:
        return len(self.parents(s))

    def log_reward(self, s: int) -> float:
        return float(np.log(self.reward(s)))

    @property
    def enumerable(self) -> bool:
        return self.num_states <= ENUMERATION_CAP

    # -- batched queries (vectorized overrides keep training loops fast) ----

    def is_terminal_batch(self, states: np.ndarray) -> np.ndarray:
        return np.array([self.is_terminal(int(s)) for s in states], dtype=bool)

    def num_parents_batch(self, states: np.ndarray) -> np.ndarray:
        return np.array([self.num_parents(int(s)) for s in states], dtype=np.int64)

    def log_reward_batch(self, states: np.ndarray) -> np.ndarray:
        return np.array([self.log_reward(int(s)) for s in states])

    def reward_batch(self, states: np.ndarray) -> np.ndarray:
        return np.array([self.reward(int(s)) for s in states])

    def action_mask_batch(self, states: np.ndarray) -> np.ndarray:
        mask = np.zeros((len(states), self.num_actions), dtype=bool)
        for i, s in enumerate(states):
            mask[i, self.valid_actions(int(s))] = True
        return mask

    def step_batch(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return np.array(
            [self.child(int(s), int(a)) for s, a in zip(states, actions)],
            dtype=np.int64,
        )

    def encode_batch(self, states: np.ndarray) -> np.ndarray:
        return np.stack([self.encode(int(s)) for s in states])

    def id_array(self, states) -> np.ndarray:
        """State ids as an array; environments whose ids exceed int64 override."""
        return np.array([int(s) for s in states], dtype=np.int64)

    def encoding_matrix(self) -> np.ndarray:
        """Dense state-by-feature table; cached (enumerable environments only)."""
        cached = getattr(self, "_encoding_matrix", None)
        if cached is None:
            ensure_enumerable(self)
            cached = self.encode_batch(np.arange(self.num_states))
            self._encoding_matrix = cached
        return cached

    def action_mask_table(self) -> np.ndarray | None:
        """Dense state-by-action validity table, or None when the state
        space is too large to tabulate; cached."""
        cached = getattr(self, "_mask_table", None)
        if cached is None:
            if self.num_states * self.num_actions > 100_000_000:
                return None
            cached = self.action_mask_batch(np.arange(self.num_states))
            self._mask_table = cached
        return cached

    def num_parents_table(self) -> np.ndarray | None:
        """Dense per-state parent counts, or None for huge state spaces; cached."""
        cached = getattr(self, "_num_parents_table", None)
        if cached is None:
            if self.num_states > 10_000_000:
                return None
            cached = self.num_parents_batch(np.arange(self.num_states))
            self._num_parents_table = cached
        return cached

    def state_label(self, s: int) -> str:
        return str(s)


def ensure_enumerable(env: EnvGraph, cap: int = ENUMERATION_CAP) -> None:
    if env.num_states > cap:
        raise CapacityError(
            f"environment has {env.num_states} states, over the cap of {cap}"
        )


def topo_order(env: EnvGraph, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Topological order of all states, initial state first.

    Deterministic: among states whose predecessors are all placed, the
    smallest id goes next (Kahn's algorithm with a min-heap).
    """
    ensure_enumerable(env, cap)
    n = env.num_states
    indegree = np.zeros(n, dtype=np.int64)
    for s in range(n):
        for _, nxt in env.children(s):
            indegree[nxt] += 1
    ready = [s for s in range(n) if indegree[s] == 0]
    heapq.heapify(ready)
    order = np.empty(n, dtype=np.int64)
    filled = 0
    while ready:
        s = heapq.heappop(ready)
        order[filled] = s
        filled += 1
        for _, nxt in env.children(s):
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, nxt)
    if filled != n:
        raise InvalidStateError("graph has a cycle; no topological order exists")
    return order


def reachable_states(env: EnvGraph, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Breadth-first reachable set from the initial state (boolean mask)."""
    ensure_enumerable(env, cap)
    seen = np.zeros(env.num_states, dtype=bool)
    seen[env.initial_state] = True
    frontier = [env.initial_state]
    while frontier:
        nxt_frontier = []
        for s in frontier:
            for _, nxt in env.children(s):
                if not seen[nxt]:
                    seen[nxt] = True
                    nxt_frontier.append(nxt)
        frontier = nxt_frontier
    return seen


class ExplicitGraph(EnvGraph):
    """A small DAG given directly by adjacency lists plus terminal rewards.

    Handy for unit fixtures (chains, diamonds) and for users with bespoke
    state spaces.  Terminal states are exactly those with no outgoing
    edges; each must appear in ``rewards``.
    """

    def __init__(
        self,
        adjacency: dict[int, list[int]],
        rewards: dict[int, float],
        initial_state: int = 0,
    ):
        states = set(adjacency) | {t for ch in adjacency.values() for t in ch}
        states |= set(rewards) | {initial_state}
        n = max(states) + 1
        if states != set(range(n)):
            raise InvalidStateError("states must be the dense range 0..max")
        self.num_states = n
        self.initial_state = initial_state
        self._children = [sorted(adjacency.get(s, [])) for s in range(n)]
        self._parents: list[list[int]] = [[] for _ in range(n)]
        for s in range(n):
            for nxt in self._children[s]:
                self._parents[nxt].append(s)
        for s in range(n):
            self._parents[s].sort()
        self.num_actions = max((len(c) for c in self._children), default=0)
        self.encoding_dim = n
        self._rewards = dict(rewards)
        self._validate()

    def _validate(self) -> None:
        if self._parents[self.initial_state]:
            raise InvalidStateError("initial state must have no incoming edges")
        topo_order(self)  # raises on cycles
        if not reachable_states(self).all():
            raise InvalidStateError("all states must be reachable from the start")
        for s in range(self.num_states):
            if self.is_terminal(s):
                r = self._rewards.get(s)
                if r is None or not r > 0:
                    raise InvalidStateError(
                        f"terminal state {s} needs a strictly positive reward"
                    )

    def is_terminal(self, s: int) -> bool:
        self.check_state(s)
        return not self._children[s]

    def children(self, s: int) -> list[tuple[int, int]]:
        self.check_state(s)
        return list(enumerate(self._children[s]))

    def parents(self, s: int) -> list[int]:
        self.check_state(s)
        return list(self._parents[s])

    def reward(self, s: int) -> float:
        if not self.is_terminal(s):
            raise InvalidStateError(f"state {s} is not terminal")
        return self._rewards[s]

    def encode(self, s: int) -> np.ndarray:
        self.check_state(s)
        vec = np.zeros(self.num_states)
        vec[s] = 1.0
        return vec
