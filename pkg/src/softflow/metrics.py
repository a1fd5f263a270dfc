"""Evaluation: windowed empirical distributions, exact and sampled
distribution distances, backward-walk probability estimation, mode
discovery counting, rank correlation, and the on-disk metrics schema.
"""

from __future__ import annotations

import csv
import json
import warnings
from collections import Counter, deque
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .graphs import EnvGraph
from .mdp import UniformBackward

CSV_COLUMNS = ("trajectories", "l1", "tv_exact", "loss", "modes", "seconds", "seed")


class SampleWindow:
    """Ring of the most recent terminal samples with running counts."""

    def __init__(self, size: int = 200_000):
        if size <= 0:
            raise ValueError("window size must be positive")
        self.size = size
        self._ring: deque = deque(maxlen=size)
        self._counts: Counter = Counter()

    def __len__(self) -> int:
        return len(self._ring)

    def add(self, samples) -> None:
        for x in samples:
            x = int(x)
            if len(self._ring) == self.size:
                oldest = self._ring[0]
                self._counts[oldest] -= 1
                if not self._counts[oldest]:
                    del self._counts[oldest]
            self._ring.append(x)
            self._counts[x] += 1

    def frequency(self, x: int) -> float:
        return self._counts.get(x, 0) / len(self._ring)

    def counts(self) -> Counter:
        return Counter(self._counts)


def l1_distance(window: SampleWindow, target: dict[int, float]) -> float:
    """Mean absolute gap, per terminal state, between the target
    distribution and the window's empirical frequencies.

    Symmetric in the two distributions: the sum runs over the union of
    their supports (identical to summing over the terminal set whenever
    the window holds terminal samples), normalized by the target's
    support size.
    """
    if not len(window):
        raise ValueError("cannot evaluate an empty sample window")
    n = len(window)
    counts = window._counts
    keys = set(target) | set(counts)
    return sum(abs(target.get(x, 0.0) - counts.get(x, 0) / n) for x in keys) / len(target)


def total_variation(p: dict[int, float], q: dict[int, float]) -> float:
    """Half the total absolute difference between two distributions."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in keys)


def mc_prob_estimate(
    env: EnvGraph,
    policy,
    x: int,
    n_samples: int = 10,
    rng: np.random.Generator | None = None,
    backward=None,
) -> float:
    """Estimate the probability that ``policy`` terminates at ``x``.

    Walks backward from ``x`` to the start ``n_samples`` times under the
    backward policy and averages the forward/backward path-probability
    ratios; unbiased for any strictly positive backward policy.
    """
    if not env.is_terminal(x):
        raise ValueError(f"state {x} is not terminal")
    backward = backward if backward is not None else UniformBackward()
    rng = rng if rng is not None else np.random.default_rng()
    total = 0.0
    for _ in range(n_samples):
        log_forward = 0.0
        log_backward = 0.0
        s = x
        while s != env.initial_state:
            parent = backward.sample_parent(env, s, rng)
            log_backward += backward.log_prob(env, parent, s)
            log_forward += policy.edge_log_prob(env, parent, s)
            s = parent
        total += float(np.exp(log_forward - log_backward))
    return total / n_samples


def mc_prob_estimates(
    env: EnvGraph,
    policy,
    x: int,
    n_estimates: int,
    n_samples: int = 10,
    rng: np.random.Generator | None = None,
    backward=None,
) -> np.ndarray:
    """Many independent copies of the backward-walk estimator at once.

    Same algorithm as ``mc_prob_estimate`` (sample parents uniformly
    backward from ``x``, average forward/backward likelihood ratios over
    ``n_samples`` walks), vectorized over enumerable state spaces.
    """
    if not env.is_terminal(x):
        raise ValueError(f"state {x} is not terminal")
    if backward is not None and getattr(backward, "kind", None) != "uniform":
        raise ValueError("the batched estimator supports the uniform backward policy")
    rng = rng if rng is not None else np.random.default_rng()
    from .oracle import adjacency  # deferred: metrics stays importable alone

    adj = adjacency(env)
    rows = [
        None if adj.terminal_mask[s] else np.asarray(policy.row(s), dtype=float)
        for s in range(env.num_states)
    ]
    max_parents = max(env.num_parents(s) for s in range(env.num_states))
    parent_table = np.zeros((env.num_states, max_parents), dtype=np.int64)
    parent_count = np.zeros(env.num_states, dtype=np.int64)
    log_pf_table = np.full((env.num_states, max_parents), -np.inf)
    with np.errstate(divide="ignore"):
        for s in range(env.num_states):
            if s == env.initial_state:
                continue
            parents = env.parents(s)
            parent_count[s] = len(parents)
            for j, p in enumerate(parents):
                parent_table[s, j] = p
                position = int(np.flatnonzero(adj.children[p] == s)[0])
                log_pf_table[s, j] = np.log(rows[p][position])

    walks = n_estimates * n_samples
    state = np.full(walks, x, dtype=np.int64)
    log_ratio = np.zeros(walks)
    active = state != env.initial_state
    while active.any():
        idx = np.flatnonzero(active)
        here = state[idx]
        count = parent_count[here]
        pick = (rng.random(len(idx)) * count).astype(np.int64)
        log_ratio[idx] += log_pf_table[here, pick] + np.log(count)
        state[idx] = parent_table[here, pick]
        active[idx] = state[idx] != env.initial_state
    return np.exp(log_ratio).reshape(n_estimates, n_samples).mean(axis=1)


class ModeTracker:
    """Which reward modes have been hit within a Hamming radius so far.

    Monotone: once a mode has seen a nearby sample it stays counted.
    """

    def __init__(self, env, delta: int | None = None):
        self.env = env
        self.delta = env.n // 4 if delta is None else int(delta)
        self._mode_bits = env._mode_bits
        self._found = np.zeros(len(env.modes), dtype=bool)

    @property
    def count(self) -> int:
        return int(self._found.sum())

    def update(self, terminal_states) -> int:
        terminal_states = list(terminal_states)
        if terminal_states:
            bits = np.stack([self.env.bits(int(x)) for x in terminal_states])
            dists = (bits[:, None, :] != self._mode_bits[None, :, :]).sum(axis=2)
            self._found |= (dists <= self.delta).any(axis=0)
        return self.count


def spearman(xs, ys) -> float:
    """Rank correlation with average-rank ties; NaN on degenerate input."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length sequences of length >= 2")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        return float("nan")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return float(stats.spearmanr(xs, ys).statistic)


@dataclass
class MetricsRow:
    trajectories: int
    l1: float | None
    tv_exact: float | None
    loss: float | None
    modes: int | None
    seconds: float
    seed: int


class RunMetrics:
    """Time-indexed evaluation records for one training run."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.rows: list[MetricsRow] = []

    def add(
        self,
        trajectories: int,
        l1: float | None,
        tv_exact: float | None,
        loss: float | None,
        modes: int | None,
        seconds: float,
    ) -> None:
        if self.rows and trajectories <= self.rows[-1].trajectories:
            raise ValueError("trajectory counts must be strictly increasing")
        self.rows.append(
            MetricsRow(int(trajectories), l1, tv_exact, loss, modes, seconds, self.seed)
        )

    @staticmethod
    def _fmt(value) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [
                        row.trajectories,
                        self._fmt(row.l1),
                        self._fmt(row.tv_exact),
                        self._fmt(row.loss),
                        self._fmt(row.modes),
                        f"{row.seconds:.3f}",
                        row.seed,
                    ]
                )

    def summary(self) -> dict:
        last = self.rows[-1] if self.rows else None
        return {
            "seed": self.seed,
            "evaluations": len(self.rows),
            "final": None
            if last is None
            else {
                "trajectories": last.trajectories,
                "l1": last.l1,
                "tv_exact": last.tv_exact,
                "loss": last.loss,
                "modes": last.modes,
                "seconds": last.seconds,
            },
        }


def read_metrics_csv(path) -> list[dict]:
    """Rows of a metrics CSV with numeric fields parsed (None for blanks)."""
    out = []
    with open(path, newline="") as fh:
        for record in csv.DictReader(fh):
            row: dict = {}
            for key, raw in record.items():
                if raw == "" or raw is None:
                    row[key] = None
                elif key in ("trajectories", "modes", "seed"):
                    row[key] = int(raw)
                else:
                    row[key] = float(raw)
            out.append(row)
    return out


def write_summary(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
