"""Concrete environments: hypergrids with corner-mode rewards and
fixed-length bit sequences filled in any order.

Both environments use an arithmetic id encoding, so structural queries
(children, parents, stepping) are closed-form integer operations and the
batched variants vectorize.  Bit-sequence instances whose state count
exceeds the int64 range fall back to object arrays of Python ints; they
stay runnable for training but are rejected by every tabular routine.
"""

from __future__ import annotations

import numpy as np

from .graphs import EnvGraph, InvalidStateError, ensure_enumerable


class HyperGrid(EnvGraph):
    """D-dimensional grid of side H with a terminating copy of every cell.

    Non-terminal states are the grid points, id = sum_i coords[i] * H**i.
    Each has one increment action per dimension that stays inside the grid
    (action i increments coordinate i) plus a terminating action (action D)
    into the cell's terminal copy, id + H**D.  Rewards live on the copies:
    a base level ``r0`` everywhere, ``r1`` added near all corners and
    ``r2`` on a thin shell inside the corner regions.
    """

    def __init__(
        self,
        height: int = 8,
        ndim: int = 2,
        r0: float = 1e-3,
        r1: float = 0.5,
        r2: float = 2.0,
    ):
        if height < 2 or ndim < 1:
            raise ValueError("need height >= 2 and ndim >= 1")
        if not 0 < r0 < r1 < r2:
            raise ValueError("reward constants must satisfy 0 < r0 < r1 < r2")
        self.height = height
        self.ndim = ndim
        self.r0, self.r1, self.r2 = float(r0), float(r1), float(r2)
        self.grid_size = height**ndim
        self.num_states = 2 * self.grid_size
        self.num_actions = ndim + 1
        self.encoding_dim = ndim * height
        self._powers = height ** np.arange(ndim, dtype=np.int64)

    # -- id arithmetic -------------------------------------------------------

    def coords(self, s: int) -> tuple[int, ...]:
        self.check_state(s)
        base = s % self.grid_size
        out = []
        for _ in range(self.ndim):
            base, c = divmod(base, self.height)
            out.append(c)
        return tuple(out)

    def coords_batch(self, states: np.ndarray) -> np.ndarray:
        base = np.asarray(states, dtype=np.int64) % self.grid_size
        return (base[:, None] // self._powers[None, :]) % self.height

    def state_id(self, coords, terminal: bool = False) -> int:
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.ndim or not all(0 <= c < self.height for c in coords):
            raise InvalidStateError(f"coordinates {coords} outside the grid")
        base = int(np.dot(coords, self._powers))
        return base + self.grid_size if terminal else base

    # -- structure -----------------------------------------------------------

    def is_terminal(self, s: int) -> bool:
        self.check_state(s)
        return s >= self.grid_size

    def children(self, s: int) -> list[tuple[int, int]]:
        if self.is_terminal(s):
            return []
        c = self.coords(s)
        edges = [
            (i, s + int(self._powers[i]))
            for i in range(self.ndim)
            if c[i] < self.height - 1
        ]
        edges.append((self.ndim, s + self.grid_size))
        return edges

    def parents(self, s: int) -> list[int]:
        if self.is_terminal(s):
            return [s - self.grid_size]
        c = self.coords(s)
        return [s - int(self._powers[i]) for i in range(self.ndim) if c[i] > 0]

    def num_parents(self, s: int) -> int:
        if self.is_terminal(s):
            return 1
        return sum(c > 0 for c in self.coords(s))

    def reward(self, s: int) -> float:
        if not self.is_terminal(s):
            raise InvalidStateError(f"state {s} is not terminal")
        return float(self.reward_at(self.coords(s)))

    def reward_at(self, coords) -> float:
        """Reward of the terminal copy of the cell at ``coords``."""
        coords = np.asarray(coords)
        if coords.shape != (self.ndim,) or (coords < 0).any() or (
            coords >= self.height
        ).any():
            raise InvalidStateError(f"coordinates {coords} outside the grid")
        offset = np.abs(coords / (self.height - 1) - 0.5)
        value = self.r0
        if (offset > 0.25).all():
            value += self.r1
        if ((offset > 0.3) & (offset < 0.4)).all():
            value += self.r2
        return value

    def encode(self, s: int) -> np.ndarray:
        c = self.coords(s)
        vec = np.zeros(self.encoding_dim)
        for i, ci in enumerate(c):
            vec[i * self.height + ci] = 1.0
        return vec

    def terminal_states(self):
        return iter(range(self.grid_size, self.num_states))

    def state_label(self, s: int) -> str:
        tag = "T" if self.is_terminal(s) else ""
        return "".join(str(c) for c in self.coords(s)) + tag

    # -- batched queries -----------------------------------------------------

    def is_terminal_batch(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(states) >= self.grid_size

    def num_parents_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        counts = (self.coords_batch(states) > 0).sum(axis=1)
        return np.where(states >= self.grid_size, 1, counts)

    def reward_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        if (states < self.grid_size).any():
            raise InvalidStateError("reward_batch expects terminal states")
        offset = np.abs(self.coords_batch(states) / (self.height - 1) - 0.5)
        value = np.full(len(states), self.r0)
        value += self.r1 * (offset > 0.25).all(axis=1)
        value += self.r2 * ((offset > 0.3) & (offset < 0.4)).all(axis=1)
        return value

    def log_reward_batch(self, states: np.ndarray) -> np.ndarray:
        return np.log(self.reward_batch(states))

    def action_mask_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        nonterminal = states < self.grid_size
        mask = np.zeros((len(states), self.num_actions), dtype=bool)
        mask[:, : self.ndim] = self.coords_batch(states) < self.height - 1
        mask[:, self.ndim] = True
        mask &= nonterminal[:, None]
        return mask

    def step_batch(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        actions = np.asarray(actions, dtype=np.int64)
        increment = np.where(
            actions == self.ndim, self.grid_size, self._powers[actions % self.ndim]
        )
        return states + increment

    def encode_batch(self, states: np.ndarray) -> np.ndarray:
        coords = self.coords_batch(np.asarray(states, dtype=np.int64))
        out = np.zeros((len(coords), self.encoding_dim))
        rows = np.arange(len(coords))
        for i in range(self.ndim):
            out[rows, i * self.height + coords[:, i]] = 1.0
        return out


class BitSequence(EnvGraph):
    """Fixed-length bit strings built by filling k-bit words in any order.

    A state is a row of ``n // k`` slots, each holding a k-bit word or the
    empty marker; id = sum_p digit[p] * (2**k + 1)**p with the empty marker
    as digit value 2**k.  An action (slot p, word v) has id p * 2**k + v and
    is valid whenever slot p is empty.  Terminal states are the fully
    filled rows; their reward decays exponentially with the Hamming
    distance to the nearest mode string.
    """

    EMPTY_LABEL = "_"

    def __init__(self, n: int, k: int, modes, reward_exponent: float = 1.0):
        if n <= 0 or k <= 0 or n % k != 0:
            raise ValueError("need positive n, k with k dividing n")
        if reward_exponent < 1:
            raise ValueError("reward_exponent must be >= 1")
        modes = list(modes)
        if not modes:
            raise ValueError("need at least one mode string")
        for m in modes:
            if len(m) != n or set(m) - {"0", "1"}:
                raise ValueError(f"mode {m!r} is not an {n}-bit string")
        self.n = n
        self.k = k
        self.words = n // k
        self.vocab = 2**k
        self.radix = self.vocab + 1
        self.empty = self.vocab
        self.modes = modes
        self.reward_exponent = float(reward_exponent)
        self._mode_bits = np.array(
            [[int(b) for b in m] for m in modes], dtype=np.uint8
        )
        self.num_states = self.radix**self.words
        self.num_actions = self.words * self.vocab
        self.encoding_dim = self.words * self.radix
        self.initial_state = self.empty * (self.num_states - 1) // (self.radix - 1)
        # Batched id arithmetic needs Python ints once int64 would overflow.
        self._id_dtype = np.int64 if self.num_states < 2**62 else object
        self._powers = [self.radix**p for p in range(self.words)]

    # -- id arithmetic -------------------------------------------------------

    def digits(self, s: int) -> tuple[int, ...]:
        self.check_state(s)
        out = []
        for _ in range(self.words):
            s, d = divmod(s, self.radix)
            out.append(d)
        return tuple(out)

    def digits_batch(self, states: np.ndarray) -> np.ndarray:
        states = self.id_array(states)
        cols = []
        for _ in range(self.words):
            states, d = np.divmod(states, self.radix)
            cols.append(d)
        return np.stack(cols, axis=1).astype(np.int64)

    def id_array(self, states) -> np.ndarray:
        return np.array([int(s) for s in states], dtype=self._id_dtype)

    def state_id(self, digits) -> int:
        digits = tuple(int(d) for d in digits)
        if len(digits) != self.words or not all(0 <= d <= self.empty for d in digits):
            raise InvalidStateError(f"bad word digits {digits}")
        return sum(d * p for d, p in zip(digits, self._powers))

    def bits(self, s: int) -> np.ndarray:
        """The n-bit string of a terminal state, one uint8 per bit."""
        digits = self.digits(s)
        if any(d == self.empty for d in digits):
            raise InvalidStateError(f"state {s} has empty slots")
        out = np.empty(self.n, dtype=np.uint8)
        for p, d in enumerate(digits):
            for j in range(self.k):
                out[p * self.k + j] = (d >> (self.k - 1 - j)) & 1
        return out

    def string_id(self, bit_string: str) -> int:
        """Terminal state id of a complete n-bit string."""
        if len(bit_string) != self.n or set(bit_string) - {"0", "1"}:
            raise InvalidStateError(f"{bit_string!r} is not an {self.n}-bit string")
        digits = [
            int(bit_string[p * self.k : (p + 1) * self.k], 2)
            for p in range(self.words)
        ]
        return self.state_id(digits)

    # -- structure -----------------------------------------------------------

    def is_terminal(self, s: int) -> bool:
        return self.empty not in self.digits(s)

    def children(self, s: int) -> list[tuple[int, int]]:
        digits = self.digits(s)
        edges = []
        for p, d in enumerate(digits):
            if d == self.empty:
                base = s - (self.empty * self._powers[p])
                edges.extend(
                    (p * self.vocab + v, base + v * self._powers[p])
                    for v in range(self.vocab)
                )
        return edges

    def parents(self, s: int) -> list[int]:
        digits = self.digits(s)
        return [
            s + (self.empty - d) * self._powers[p]
            for p, d in enumerate(digits)
            if d != self.empty
        ]

    def num_parents(self, s: int) -> int:
        return sum(d != self.empty for d in self.digits(s))

    def reward(self, s: int) -> float:
        return float(np.exp(-self.reward_exponent * self.mode_distance(s)))

    def log_reward(self, s: int) -> float:
        return -self.reward_exponent * self.mode_distance(s)

    def mode_distance(self, s: int) -> int:
        """Hamming distance from terminal state ``s`` to the nearest mode."""
        bits = self.bits(s)
        return int((bits[None, :] != self._mode_bits).sum(axis=1).min())

    def encode(self, s: int) -> np.ndarray:
        vec = np.zeros(self.encoding_dim)
        for p, d in enumerate(self.digits(s)):
            vec[p * self.radix + d] = 1.0
        return vec

    def terminal_states(self):
        ensure_enumerable(self)
        filled = np.arange(self.vocab, dtype=np.int64)
        ids = filled
        for p in range(1, self.words):
            ids = (ids[:, None] + filled[None, :] * self._powers[p]).ravel()
        return iter(int(s) for s in ids)

    def state_label(self, s: int) -> str:
        return "".join(
            self.EMPTY_LABEL * self.k if d == self.empty else format(d, f"0{self.k}b")
            for d in self.digits(s)
        )

    # -- batched queries -----------------------------------------------------

    def is_terminal_batch(self, states: np.ndarray) -> np.ndarray:
        return (self.digits_batch(states) != self.empty).all(axis=1)

    def num_parents_batch(self, states: np.ndarray) -> np.ndarray:
        return (self.digits_batch(states) != self.empty).sum(axis=1)

    def log_reward_batch(self, states: np.ndarray) -> np.ndarray:
        digits = self.digits_batch(states)
        if (digits == self.empty).any():
            raise InvalidStateError("log_reward_batch expects terminal states")
        shifts = np.arange(self.k - 1, -1, -1, dtype=np.int64)
        bits = ((digits[:, :, None] >> shifts[None, None, :]) & 1).reshape(
            len(digits), self.n
        )
        dists = (bits[:, None, :] != self._mode_bits[None, :, :]).sum(axis=2)
        return -self.reward_exponent * dists.min(axis=1).astype(float)

    def reward_batch(self, states: np.ndarray) -> np.ndarray:
        return np.exp(self.log_reward_batch(states))

    def action_mask_batch(self, states: np.ndarray) -> np.ndarray:
        empty = self.digits_batch(states) == self.empty
        return np.repeat(empty, self.vocab, axis=1)

    def step_batch(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        states = self.id_array(states)
        actions = np.asarray(actions, dtype=np.int64)
        slots, words = np.divmod(actions, self.vocab)
        offsets = np.array(
            [(self.empty - int(v)) * self._powers[int(p)] for p, v in zip(slots, words)],
            dtype=self._id_dtype,
        )
        return states - offsets

    def encode_batch(self, states: np.ndarray) -> np.ndarray:
        digits = self.digits_batch(states)
        out = np.zeros((len(digits), self.encoding_dim))
        rows = np.arange(len(digits))
        for p in range(self.words):
            out[rows, p * self.radix + digits[:, p]] = 1.0
        return out


def random_modes(n: int, num_modes: int, rng) -> list[str]:
    """Sample ``num_modes`` distinct uniform n-bit strings."""
    if num_modes > 2**n:
        raise ValueError(f"cannot pick {num_modes} distinct {n}-bit strings")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    seen: dict[str, None] = {}
    while len(seen) < num_modes:
        bits = rng.integers(0, 2, size=n)
        seen.setdefault("".join(str(b) for b in bits), None)
    return list(seen)


def save_modes(path, modes) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(modes) + "\n")


def load_modes(path) -> list[str]:
    with open(path) as fh:
        modes = [line.strip() for line in fh if line.strip()]
    if not modes:
        raise ValueError(f"no mode strings in {path}")
    return modes


def exact_partition(env: EnvGraph) -> tuple[float, dict[int, float]]:
    """Exact normalizer Z = sum of terminal rewards, and the target
    distribution reward / Z over terminal states.  Cached per environment
    (environments are immutable)."""
    cached = getattr(env, "_partition_cache", None)
    if cached is None:
        ensure_enumerable(env)
        terminals = np.fromiter(env.terminal_states(), dtype=np.int64)
        rewards = env.reward_batch(terminals)
        z = float(rewards.sum())
        cached = (z, {int(x): float(r / z) for x, r in zip(terminals, rewards)})
        env._partition_cache = cached
    return cached
