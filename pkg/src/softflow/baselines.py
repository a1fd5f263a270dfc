"""Reference flow-matching objectives with a fixed uniform backward
policy: trajectory balance (policy logits plus a learned log-partition
scalar) and detailed balance (policy logits plus a state log-flow head).

Both train on-policy: every iteration samples a fresh batch of
trajectories from the current forward policy (epsilon-mixed if asked)
and regresses the squared log-space balance residuals.  The trajectory
budget accounting matches the replay-based trainers, so curves are
comparable at equal x.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .graphs import EnvGraph, Trajectory
from .mdp import SoftMdp, UniformBackward
from .nets import (
    AdamState,
    Mlp,
    TrainingDiverged,
    adam_step,
    masked_softmax,
    save_checkpoint,
)
from .oracle import TabularPolicy
from .rng import stream_rng
from .training import NetPolicy, QModel, _EvalLoop, _masks_for, rollout
from .validation import check_env, check_positive, check_unit_interval


def tb_loss(
    env: EnvGraph,
    trajectory: Trajectory,
    log_z: float,
    policy,
    backward=None,
) -> float:
    """Squared log-residual of the trajectory balance identity for one
    complete trajectory: log Z plus the forward log-likelihood must match
    the log terminal reward plus the backward log-likelihood."""
    backward = backward if backward is not None else UniformBackward()
    residual = log_z - env.log_reward(trajectory.terminal)
    for s, s_next in zip(trajectory.states[:-1], trajectory.states[1:]):
        residual += policy.edge_log_prob(env, s, s_next)
        residual -= backward.log_prob(env, s, s_next)
    return float(residual**2)


def db_loss(
    env: EnvGraph,
    s: int,
    s_next: int,
    log_flow,
    policy,
    backward=None,
) -> float:
    """Squared log-residual of the detailed balance identity on one edge.

    ``log_flow`` maps a state to its predicted log flow; terminal states
    contribute their exact log reward instead.
    """
    backward = backward if backward is not None else UniformBackward()
    in_flow = log_flow(s) + policy.edge_log_prob(env, s, s_next)
    out_part = env.log_reward(s_next) if env.is_terminal(s_next) else log_flow(s_next)
    residual = in_flow - out_part - backward.log_prob(env, s, s_next)
    return float(residual**2)


def _flatten(env, trajectories):
    """Step-level arrays of a trajectory batch plus per-trajectory offsets."""
    states = env.id_array([s for t in trajectories for s in t.states[:-1]])
    actions = np.array([a for t in trajectories for a in t.actions], dtype=np.int64)
    nxt = env.id_array([s for t in trajectories for s in t.states[1:]])
    lengths = np.array([len(t) for t in trajectories], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    traj_of_step = np.repeat(np.arange(len(trajectories)), lengths)
    return states, actions, nxt, offsets, traj_of_step


class _PolicyNetSampler(BaseEstimator):
    """Shared scaffolding: a logits network trained on its own rollouts."""

    def _validate(self, env) -> None:
        check_env(env)
        check_positive("budget", self.budget)
        check_positive("batch_trajectories", self.batch_trajectories)
        check_positive("lr", self.lr)
        check_unit_interval("epsilon", self.epsilon)

    def _output_dim(self, env) -> int:
        raise NotImplementedError

    def _rollout_view(self, model: QModel):
        return model

    def _setup(self, env) -> None:
        pass

    def _iteration(self, env, model, trajectories, adam) -> float:
        raise NotImplementedError

    def fit(self, env: EnvGraph):
        self._validate(env)
        rollout_rng = stream_rng(self.seed, "rollout")
        net = Mlp(
            env.encoding_dim,
            self._output_dim(env),
            tuple(self.hidden_sizes),
            self.activation,
            seed=self.seed,
            rng=stream_rng(self.seed, "init"),
            lambda_coef=1.0,
        )
        model = QModel(net, env)
        view = self._rollout_view(model)
        mdp = SoftMdp(env, UniformBackward(), 1.0)
        adam = AdamState.like(net.theta)
        evals = _EvalLoop(
            env,
            self.eval_every,
            self.window_size,
            self.seed,
            self.mode_delta,
            self.wall_clock,
        )
        policy_provider = (
            (lambda: NetPolicy(view, 1.0).tabular()) if env.enumerable else None
        )
        self._setup(env)
        seen = 0
        while seen < self.budget:
            m = min(self.batch_trajectories, self.budget - seen)
            trajectories = rollout(mdp, view, m, self.epsilon, rollout_rng, 1.0)
            seen += m
            loss = self._iteration(env, model, trajectories, adam)
            if not np.isfinite(loss):
                raise TrainingDiverged("non-finite loss")
            evals.observe([t.terminal for t in trajectories], loss)
            evals.maybe_record(seen, policy_provider, final=seen >= self.budget)
        self.env_ = env
        self.mdp_ = mdp
        self.net_ = net
        self.model_ = model
        self.metrics_ = evals.metrics
        self.window_ = evals.window
        self.modes_ = evals.modes
        return self

    # -- fitted sampler surface ----------------------------------------------

    def forward_policy(self) -> NetPolicy:
        return NetPolicy(self._rollout_view(self.model_), 1.0)

    def policy_rows(self) -> TabularPolicy:
        return self.forward_policy().tabular()

    def predict_proba(self, states) -> np.ndarray:
        return self.forward_policy().action_probs(states)

    def sample(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        rng = rng if rng is not None else stream_rng(self.seed, "sample")
        view = self._rollout_view(self.model_)
        trajectories = rollout(self.mdp_, view, n, 0.0, rng, 1.0)
        return self.env_.id_array([t.terminal for t in trajectories])

    def save(self, prefix) -> None:
        save_checkpoint(prefix, self.net_)


class TrajectoryBalanceSampler(_PolicyNetSampler):
    """On-policy trajectory-balance training of a policy network.

    The log-partition scalar is a separate parameter with its own (much
    larger) learning rate; its gradient is twice the mean residual.
    """

    _method_name = "tb"

    def __init__(
        self,
        budget: int = 200_000,
        batch_trajectories: int = 16,
        lr: float = 1e-3,
        z_lr: float = 1e-1,
        epsilon: float = 0.0,
        hidden_sizes=(256, 256),
        activation: str = "leaky_relu",
        eval_every: int = 2000,
        window_size: int = 200_000,
        mode_delta: int | None = None,
        wall_clock: bool = False,
        seed: int = 0,
    ):
        self.budget = budget
        self.batch_trajectories = batch_trajectories
        self.lr = lr
        self.z_lr = z_lr
        self.epsilon = epsilon
        self.hidden_sizes = hidden_sizes
        self.activation = activation
        self.eval_every = eval_every
        self.window_size = window_size
        self.mode_delta = mode_delta
        self.wall_clock = wall_clock
        self.seed = seed

    def _output_dim(self, env) -> int:
        return env.num_actions

    def _setup(self, env) -> None:
        self.log_z_ = 0.0
        self._z_adam = AdamState.like(np.zeros(1))

    def _iteration(self, env, model, trajectories, adam) -> float:
        backward = UniformBackward()
        states, actions, nxt, offsets, traj_of_step = _flatten(env, trajectories)
        mask = _masks_for(env, states)
        logits = model.q_values(states, mask)
        probs = masked_softmax(logits, mask, 1.0)
        rows = np.arange(len(actions))
        log_pf = np.log(probs[rows, actions])
        log_pb = backward.log_prob_batch(env, states, nxt)
        log_r = env.log_reward_batch(env.id_array([t.terminal for t in trajectories]))
        residual = (
            self.log_z_
            + np.add.reduceat(log_pf, offsets)
            - log_r
            - np.add.reduceat(log_pb, offsets)
        )
        loss = float((residual**2).mean())

        # d loss / d logits = 2 r / B * (onehot(action) - policy row)
        coef = (2.0 * residual / len(trajectories))[traj_of_step]
        dlogits = -coef[:, None] * probs
        dlogits[rows, actions] += coef
        grad = model.backward(dlogits)
        adam_step(model.net.theta, grad, adam, self.lr)

        z_theta = np.array([self.log_z_])
        adam_step(z_theta, np.array([2.0 * residual.mean()]), self._z_adam, self.z_lr)
        self.log_z_ = float(z_theta[0])
        return loss


class _FlowColumnView:
    """Q-model view of a policy-plus-flow network that hides the trailing
    log-flow column from action-space consumers."""

    def __init__(self, model: QModel):
        self.inner = model
        self.env = model.env
        self.net = model.net

    def q_values(self, states, mask=None):
        wide = None
        if mask is not None:
            wide = np.concatenate([mask, np.zeros((len(mask), 1), bool)], axis=1)
        return self.inner.q_values(states, wide)[:, :-1]


class DetailedBalanceSampler(_PolicyNetSampler):
    """On-policy detailed-balance training: the network's extra output
    column predicts the state's log flow; terminal flows are clamped to
    the exact log reward inside the loss."""

    _method_name = "db"

    def __init__(
        self,
        budget: int = 200_000,
        batch_trajectories: int = 16,
        lr: float = 1e-3,
        epsilon: float = 0.0,
        hidden_sizes=(256, 256),
        activation: str = "leaky_relu",
        eval_every: int = 2000,
        window_size: int = 200_000,
        mode_delta: int | None = None,
        wall_clock: bool = False,
        seed: int = 0,
    ):
        self.budget = budget
        self.batch_trajectories = batch_trajectories
        self.lr = lr
        self.epsilon = epsilon
        self.hidden_sizes = hidden_sizes
        self.activation = activation
        self.eval_every = eval_every
        self.window_size = window_size
        self.mode_delta = mode_delta
        self.wall_clock = wall_clock
        self.seed = seed

    def _output_dim(self, env) -> int:
        return env.num_actions + 1  # trailing column: state log flow

    def _rollout_view(self, model: QModel):
        return _FlowColumnView(model)

    def _wide_forward(self, model: QModel, states) -> np.ndarray:
        return model.q_values(states, None)

    def _iteration(self, env, model, trajectories, adam) -> float:
        backward = UniformBackward()
        states, actions, nxt, _, _ = _flatten(env, trajectories)
        n = len(actions)
        rows = np.arange(n)
        mask = _masks_for(env, states)

        full = self._wide_forward(model, states)
        logits, log_flow_s = full[:, :-1], full[:, -1]
        probs = masked_softmax(logits, mask, 1.0)
        log_pf = np.log(probs[rows, actions])
        log_pb = backward.log_prob_batch(env, states, nxt)

        terminal_next = env.is_terminal_batch(nxt)
        log_flow_next = np.zeros(n)
        if terminal_next.any():
            log_flow_next[terminal_next] = env.log_reward_batch(nxt[terminal_next])
        interior = np.flatnonzero(~terminal_next)
        if len(interior):
            log_flow_next[interior] = self._wide_forward(model, nxt[interior])[:, -1]

        residual = log_flow_s + log_pf - log_flow_next - log_pb
        loss = float((residual**2).mean())
        coef = 2.0 * residual / n

        # Child-side gradient: residual depends on the child's flow output.
        grad = np.zeros_like(model.net.theta)
        if len(interior):
            d_child = np.zeros((len(interior), env.num_actions + 1))
            d_child[:, -1] = -coef[interior]
            self._wide_forward(model, nxt[interior])  # refresh the cache
            grad += model.net.backward(d_child)
        # Source-side gradient: policy logits and the source flow output.
        d_source = np.zeros((n, env.num_actions + 1))
        d_source[:, -1] = coef
        d_policy = -coef[:, None] * probs
        d_policy[rows, actions] += coef
        d_source[:, :-1] = d_policy
        self._wide_forward(model, states)  # refresh the cache
        grad += model.net.backward(d_source)
        adam_step(model.net.theta, grad, adam, self.lr)
        return loss
