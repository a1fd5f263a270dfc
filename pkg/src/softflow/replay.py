"""Prioritized transition replay over a sum tree.

Sampling is proportional to priority**alpha via stratified prefix draws
(one uniform draw per equal slice of the cumulative mass), importance
weights are (N * P(i))**-beta normalized by the largest weight in the
batch, and freshly stored transitions inherit the current maximum raw
priority so they are sampled at least once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class Transition:
    """One step of interaction, in the DAG's own id space.

    ``done`` flags steps taken *from* a terminal state (into the sink);
    ``gfn_reward`` carries the terminal reward on those steps and 0
    elsewhere.  Pipelines that fold terminal values into the target
    instead of storing sink steps only ever hold done=0 records.
    """

    state: int
    action: int
    next_state: int
    gfn_reward: float
    done: int


class SampleBatch(NamedTuple):
    indices: np.ndarray
    transitions: list
    weights: np.ndarray
    stamps: np.ndarray


class _Tree:
    """Complete binary tree over a power-of-two leaf block.

    Internal nodes are always recomputed from their children (never
    incrementally adjusted), so the root agrees with a linear scan of the
    leaves up to summation order alone.
    """

    def __init__(self, capacity: int):
        self.leaf_base = 1
        while self.leaf_base < capacity:
            self.leaf_base *= 2
        self.nodes = np.zeros(2 * self.leaf_base)

    def get(self, index: int) -> float:
        return float(self.nodes[index + self.leaf_base])

    def set_batch(self, indices: np.ndarray, values: np.ndarray) -> None:
        idx = np.asarray(indices, dtype=np.int64) + self.leaf_base
        self.nodes[idx] = values
        parents = np.unique(idx >> 1)
        while parents[-1] >= 1:
            parents = parents[parents >= 1]
            self.nodes[parents] = self._combine(
                self.nodes[2 * parents], self.nodes[2 * parents + 1]
            )
            parents = np.unique(parents >> 1)

    @property
    def root(self) -> float:
        return float(self.nodes[1])


class SumTree(_Tree):
    @staticmethod
    def _combine(left, right):
        return left + right

    def set(self, index: int, value: float) -> None:
        nodes = self.nodes
        i = index + self.leaf_base
        nodes[i] = value
        i >>= 1
        while i >= 1:
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1]
            i >>= 1

    @property
    def total(self) -> float:
        return self.root

    def find(self, prefix: float) -> int:
        return int(self.find_batch(np.array([prefix]))[0])

    def find_batch(self, prefixes: np.ndarray) -> np.ndarray:
        """Leaf indices whose cumulative-mass interval contains each prefix."""
        prefixes = np.asarray(prefixes, dtype=float).copy()
        idx = np.ones(len(prefixes), dtype=np.int64)
        while idx[0] < self.leaf_base:
            left = 2 * idx
            left_mass = self.nodes[left]
            go_right = prefixes >= left_mass
            prefixes -= np.where(go_right, left_mass, 0.0)
            idx = left + go_right
        return idx - self.leaf_base


class MaxTree(_Tree):
    @staticmethod
    def _combine(left, right):
        return np.maximum(left, right)

    def set(self, index: int, value: float) -> None:
        nodes = self.nodes
        i = index + self.leaf_base
        nodes[i] = value
        i >>= 1
        while i >= 1:
            left, right = nodes[2 * i], nodes[2 * i + 1]
            fresh = left if left >= right else right
            if fresh == nodes[i]:
                break  # ancestors cannot change either
            nodes[i] = fresh
            i >>= 1

    @property
    def max_value(self) -> float:
        return self.root


class PerBuffer:
    """Fixed-capacity ring of transitions with proportional prioritization.

    Every stored item keeps a raw priority (floored at ``eps_priority``);
    the sum tree holds priority**alpha.  ``alpha=0`` degenerates to
    uniform sampling and ``beta=0`` to unit importance weights.  Slots
    are stamped with a monotone insertion counter so that priority
    updates aimed at an already-evicted item are skipped (and counted)
    rather than misapplied.
    """

    def __init__(
        self,
        capacity: int,
        alpha: float = 0.5,
        beta: float = 0.0,
        eps_priority: float = 1e-6,
    ):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        if alpha < 0 or beta < 0 or eps_priority <= 0:
            raise ValueError("need alpha >= 0, beta >= 0, eps_priority > 0")
        self.capacity = int(capacity)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.eps_priority = float(eps_priority)
        self.storage: list = [None] * self.capacity
        self.sum_tree = SumTree(self.capacity)
        self.max_tree = MaxTree(self.capacity)
        self._stamps = np.full(self.capacity, -1, dtype=np.int64)
        self._count = 0
        self.stale_updates = 0

    def __len__(self) -> int:
        return min(self._count, self.capacity)

    def push(self, transition: Transition) -> None:
        priority = self.max_tree.max_value if len(self) else 1.0
        slot = self._count % self.capacity
        self.storage[slot] = transition
        self._stamps[slot] = self._count
        self._set_priority(slot, priority)
        self._count += 1

    def extend(self, transitions) -> None:
        for t in transitions:
            self.push(t)

    def _set_priority(self, slot: int, priority: float) -> None:
        priority = max(float(priority), self.eps_priority)
        self.sum_tree.set(slot, priority**self.alpha)
        self.max_tree.set(slot, priority)

    def priority(self, slot: int) -> float:
        return self.max_tree.get(slot)

    def sample(self, batch_size: int, rng: np.random.Generator) -> SampleBatch:
        if not len(self):
            raise ValueError("cannot sample from an empty buffer")
        total = self.sum_tree.total
        segment = total / batch_size
        prefixes = (np.arange(batch_size) + rng.random(batch_size)) * segment
        indices = self.sum_tree.find_batch(prefixes)
        mass = self.sum_tree.nodes[indices + self.sum_tree.leaf_base]
        probs = mass / total
        if self.beta == 0.0:
            weights = np.ones(batch_size)
        else:
            weights = (len(self) * probs) ** (-self.beta)
            weights = weights / weights.max()
        return SampleBatch(
            indices=indices,
            transitions=[self.storage[i] for i in indices],
            weights=weights,
            stamps=self._stamps[indices].copy(),
        )

    def update_priorities(self, indices, priorities, stamps=None) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        priorities = np.asarray(priorities, dtype=float)
        if stamps is not None:
            live = self._stamps[indices] == np.asarray(stamps)
            self.stale_updates += int((~live).sum())
            indices, priorities = indices[live], priorities[live]
        if not len(indices):
            return
        floored = np.maximum(priorities, self.eps_priority)
        # Later duplicates win, matching sequential application order.
        self.sum_tree.set_batch(indices, floored**self.alpha)
        self.max_tree.set_batch(indices, floored)

    def probabilities(self) -> np.ndarray:
        """Current sampling distribution over occupied slots."""
        n = len(self)
        leaves = self.sum_tree.nodes[self.sum_tree.leaf_base : self.sum_tree.leaf_base + n]
        return leaves / leaves.sum()
