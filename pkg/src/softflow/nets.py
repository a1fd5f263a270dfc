"""Function approximation: a fully-connected Q-network with explicit
reverse-mode gradients, a tabular Q lookup with the same interface, and a
bias-corrected Adam optimizer.

Everything is 64-bit and deterministic given (seed, inputs).  Parameters
live in one flat vector; per-layer weight matrices are reshaped views
into it, so optimizer steps on the flat vector update the network in
place.  Invalid actions are masked to a large negative sentinel rather
than -inf so downstream softmax / log-sum-exp stay NaN-free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MASK_SENTINEL = -1e9


class TrainingDiverged(RuntimeError):
    """A non-finite loss or gradient surfaced during optimization."""


def _leaky_relu(x):
    return np.where(x > 0, x, 0.01 * x)


def _leaky_relu_grad(x):
    return np.where(x > 0, 1.0, 0.01)


ACTIVATIONS = {
    "leaky_relu": (_leaky_relu, _leaky_relu_grad),
    "relu": (lambda x: np.maximum(x, 0.0), lambda x: (x > 0).astype(float)),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
}


def masked_logsumexp(values: np.ndarray, mask: np.ndarray, lam: float = 1.0) -> np.ndarray:
    """Row-wise tempered log-sum-exp over the valid entries only."""
    neg = np.where(mask, values, -np.inf)
    m = neg.max(axis=1, keepdims=True)
    expo = np.where(mask, np.exp((values - m) / lam), 0.0)
    return m[:, 0] + lam * np.log(expo.sum(axis=1))


def masked_softmax(values: np.ndarray, mask: np.ndarray, lam: float = 1.0) -> np.ndarray:
    """Row-wise tempered softmax restricted to the valid entries."""
    neg = np.where(mask, values, -np.inf)
    m = neg.max(axis=1, keepdims=True)
    expo = np.where(mask, np.exp((values - m) / lam), 0.0)
    return expo / expo.sum(axis=1, keepdims=True)


class Mlp:
    """Multi-layer perceptron producing one output per action.

    With ``dueling=True`` the final layer splits into a scalar value
    stream and a per-action advantage stream combined as
    value + advantage - logsumexp(advantage over valid actions), which
    pins the tempered log-sum-exp of the output row to the value stream.
    """

    kind = "mlp"

    def __init__(
        self,
        input_dim: int,
        output_dim: int,
        hidden_sizes=(256, 256),
        activation: str = "leaky_relu",
        seed: int | None = 0,
        rng: np.random.Generator | None = None,
        dueling: bool = False,
        lambda_coef: float = 1.0,
    ):
        if input_dim <= 0 or output_dim <= 0 or any(h <= 0 for h in hidden_sizes):
            raise ValueError("all layer sizes must be positive")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.activation = activation
        self.seed = seed
        self.dueling = bool(dueling)
        self.lambda_coef = float(lambda_coef)
        self._act, self._act_grad = ACTIVATIONS[activation]

        trunk = [input_dim, *self.hidden_sizes]
        self._trunk_shapes = list(zip(trunk[:-1], trunk[1:]))
        last = trunk[-1]
        if self.dueling:
            self._head_shapes = [(last, 1), (last, output_dim)]
        else:
            self._head_shapes = [(last, output_dim)]
        shapes = self._trunk_shapes + self._head_shapes
        size = sum(i * o + o for i, o in shapes)
        self.theta = np.zeros(size)
        self._weights, self._biases = [], []
        offset = 0
        for i, o in shapes:
            self._weights.append(self.theta[offset : offset + i * o].reshape(i, o))
            offset += i * o
            self._biases.append(self.theta[offset : offset + o])
            offset += o
        rng = rng if rng is not None else np.random.default_rng(seed)
        for w, b, (i, _) in zip(self._weights, self._biases, shapes):
            bound = 1.0 / np.sqrt(i)
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        self._cache = None

    @property
    def num_params(self) -> int:
        return self.theta.size

    def copy(self) -> "Mlp":
        twin = Mlp(
            self.input_dim,
            self.output_dim,
            self.hidden_sizes,
            self.activation,
            seed=self.seed,
            dueling=self.dueling,
            lambda_coef=self.lambda_coef,
        )
        twin.theta[:] = self.theta
        return twin

    def set_flat(self, values: np.ndarray) -> None:
        self.theta[:] = values

    # -- forward / backward --------------------------------------------------

    def forward(self, x: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        """Per-action outputs with invalid actions pinned to the sentinel.

        Records intermediates; the next ``backward`` consumes them.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {x.shape[1]}")
        if mask is None:
            mask = np.ones((x.shape[0], self.output_dim), dtype=bool)
        n_trunk = len(self._trunk_shapes)
        h = x
        pre_acts, hidden = [], [x]
        for layer in range(n_trunk):
            z = h @ self._weights[layer] + self._biases[layer]
            pre_acts.append(z)
            h = self._act(z)
            hidden.append(h)
        if self.dueling:
            value = h @ self._weights[n_trunk] + self._biases[n_trunk]
            adv = h @ self._weights[n_trunk + 1] + self._biases[n_trunk + 1]
            adv_lse = masked_logsumexp(adv, mask, self.lambda_coef)
            q = value[:, 0][:, None] + adv - adv_lse[:, None]
            sm = masked_softmax(adv, mask, self.lambda_coef)
            self._cache = (mask, pre_acts, hidden, sm)
        else:
            q = h @ self._weights[n_trunk] + self._biases[n_trunk]
            self._cache = (mask, pre_acts, hidden, None)
        return np.where(mask, q, MASK_SENTINEL)

    def backward(self, dq: np.ndarray) -> np.ndarray:
        """Gradient of a scalar loss w.r.t. the flat parameters, given the
        loss gradient w.r.t. the last forward's output rows."""
        if self._cache is None:
            raise RuntimeError("backward called with no recorded forward")
        mask, pre_acts, hidden, sm = self._cache
        dq = np.asarray(dq, dtype=float) * mask
        grad = np.zeros_like(self.theta)
        g_weights, g_biases = [], []
        offset = 0
        for w in self._weights:
            g_weights.append(grad[offset : offset + w.size].reshape(w.shape))
            offset += w.size
            g_biases.append(grad[offset : offset + w.shape[1]])
            offset += w.shape[1]
        n_trunk = len(self._trunk_shapes)
        h_last = hidden[-1]
        if self.dueling:
            dvalue = dq.sum(axis=1, keepdims=True)
            dadv = dq - dvalue * sm
            g_weights[n_trunk][...] = h_last.T @ dvalue
            g_biases[n_trunk][...] = dvalue.sum(axis=0)
            g_weights[n_trunk + 1][...] = h_last.T @ dadv
            g_biases[n_trunk + 1][...] = dadv.sum(axis=0)
            dh = dvalue @ self._weights[n_trunk].T + dadv @ self._weights[n_trunk + 1].T
        else:
            g_weights[n_trunk][...] = h_last.T @ dq
            g_biases[n_trunk][...] = dq.sum(axis=0)
            dh = dq @ self._weights[n_trunk].T
        for layer in range(n_trunk - 1, -1, -1):
            dz = dh * self._act_grad(pre_acts[layer])
            g_weights[layer][...] = hidden[layer].T @ dz
            g_biases[layer][...] = dz.sum(axis=0)
            dh = dz @ self._weights[layer].T
        return grad

    def value_stream(self, x: np.ndarray) -> np.ndarray:
        """Dueling value head output (one scalar per row)."""
        if not self.dueling:
            raise RuntimeError("value_stream needs a dueling head")
        h = np.atleast_2d(np.asarray(x, dtype=float))
        for layer in range(len(self._trunk_shapes)):
            h = self._act(h @ self._weights[layer] + self._biases[layer])
        n_trunk = len(self._trunk_shapes)
        return (h @ self._weights[n_trunk] + self._biases[n_trunk])[:, 0]

    def advantage_stream(self, x: np.ndarray) -> np.ndarray:
        """Dueling advantage head output (one row per input)."""
        if not self.dueling:
            raise RuntimeError("advantage_stream needs a dueling head")
        h = np.atleast_2d(np.asarray(x, dtype=float))
        for layer in range(len(self._trunk_shapes)):
            h = self._act(h @ self._weights[layer] + self._biases[layer])
        n_trunk = len(self._trunk_shapes)
        return h @ self._weights[n_trunk + 1] + self._biases[n_trunk + 1]

    def meta(self) -> dict:
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_sizes": list(self.hidden_sizes),
            "activation": self.activation,
            "seed": self.seed,
            "dueling": self.dueling,
            "lambda_coef": self.lambda_coef,
            "layer_shapes": [list(w.shape) for w in self._weights],
        }


class TabularQ:
    """Dense per-(state, action) table behind the same forward/backward
    interface as the network; the forward input is a state-id vector."""

    kind = "tabular"

    def __init__(self, num_states: int, num_actions: int, init: float = 0.0):
        self.num_states = int(num_states)
        self.num_actions = int(num_actions)
        self.theta = np.full(self.num_states * self.num_actions, float(init))
        self.table = self.theta.reshape(self.num_states, self.num_actions)
        self._cache = None

    @property
    def num_params(self) -> int:
        return self.theta.size

    def copy(self) -> "TabularQ":
        twin = TabularQ(self.num_states, self.num_actions)
        twin.theta[:] = self.theta
        return twin

    def set_flat(self, values: np.ndarray) -> None:
        self.theta[:] = values

    def forward(self, states: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64).ravel()
        if mask is None:
            mask = np.ones((len(states), self.num_actions), dtype=bool)
        self._cache = (states, mask)
        return np.where(mask, self.table[states], MASK_SENTINEL)

    def backward(self, dq: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called with no recorded forward")
        states, mask = self._cache
        dq = np.asarray(dq, dtype=float) * mask
        grad = np.zeros_like(self.table)
        np.add.at(grad, states, dq)
        return grad.ravel()

    def meta(self) -> dict:
        return {
            "kind": self.kind,
            "num_states": self.num_states,
            "num_actions": self.num_actions,
        }


@dataclass
class AdamState:
    """First/second moment accumulators for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def like(cls, theta: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(theta), v=np.zeros_like(theta))


def adam_step(
    theta: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place on ``theta``."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != theta.shape:
        raise ValueError("gradient and parameter shapes differ")
    if not np.isfinite(grad).all():
        raise TrainingDiverged("non-finite gradient")
    state.t += 1
    state.m += (1.0 - beta1) * (grad - state.m)
    state.v += (1.0 - beta2) * (grad * grad - state.v)
    # Fold both bias corrections into scalars: step = lr' * m / (sqrt(v) + eps')
    correction1 = 1.0 - beta1**state.t
    correction2 = 1.0 - beta2**state.t
    denom = np.sqrt(state.v)
    denom /= np.sqrt(correction2)
    denom += eps
    theta -= (lr / correction1) * state.m / denom


def polyak_update(target_theta: np.ndarray, online_theta: np.ndarray, tau: float) -> None:
    """target := (1 - tau) * target + tau * online, in place."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    target_theta *= 1.0 - tau
    target_theta += tau * online_theta


def save_checkpoint(prefix, net) -> None:
    """Flat little-endian float64 weights plus a JSON sidecar."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    net.theta.astype("<f8").tofile(prefix.with_suffix(".bin"))
    with open(prefix.with_suffix(".json"), "w") as fh:
        json.dump(net.meta(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(prefix):
    """Rebuild a network or table from ``save_checkpoint`` output."""
    prefix = Path(prefix)
    with open(prefix.with_suffix(".json")) as fh:
        meta = json.load(fh)
    if meta["kind"] == "mlp":
        net = Mlp(
            meta["input_dim"],
            meta["output_dim"],
            tuple(meta["hidden_sizes"]),
            meta["activation"],
            seed=meta["seed"],
            dueling=meta["dueling"],
            lambda_coef=meta["lambda_coef"],
        )
    elif meta["kind"] == "tabular":
        net = TabularQ(meta["num_states"], meta["num_actions"])
    else:
        raise ValueError(f"unknown checkpoint kind {meta['kind']!r}")
    weights = np.fromfile(prefix.with_suffix(".bin"), dtype="<f8")
    if weights.size != net.theta.size:
        raise ValueError(
            f"checkpoint holds {weights.size} parameters, expected {net.theta.size}"
        )
    net.set_flat(weights)
    return net
