"""Entropy-regularized Q-learning on the sink-extended MDP of a flow DAG.

The trainer follows the replay-based recipe: sample a handful of
trajectories per iteration with a tempered-softmax behavior policy
(optionally epsilon-mixed with uniform), store the interior transitions,
then regress online Q-values toward targets

    y = log P_B(s | s') + logsumexp_lam(target Q(s', .))

with the next-state term replaced by the known log reward whenever s' is
terminal, so steps into the sink are never stored at all.  The Munchausen
variant adds alpha * max(lam * log pi_target(a | s), l0) to the target
and compensates by running at lam = 1 / (1 - alpha).

Priorities are the per-item Huber losses; targets are never
differentiated through.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .envs import BitSequence, exact_partition
from .graphs import EnvGraph, Trajectory
from .mdp import SoftMdp, UniformBackward
from .metrics import (
    ModeTracker,
    RunMetrics,
    SampleWindow,
    l1_distance,
    total_variation,
)
from .nets import (
    AdamState,
    Mlp,
    TabularQ,
    TrainingDiverged,
    adam_step,
    masked_logsumexp,
    masked_softmax,
    polyak_update,
    save_checkpoint,
)
from .oracle import TabularPolicy, adjacency, terminal_distribution
from .replay import PerBuffer, Transition
from .rng import stream_rng
from .validation import check_env, check_positive, check_unit_interval

# Keep dense feature tables only while they stay comfortably in memory.
FEATURE_TABLE_CELL_CAP = 50_000_000


@dataclass(frozen=True)
class MunchausenParams:
    """Scaled-log-policy bonus added to the TD target, truncated below."""

    alpha: float = 0.15
    l0: float = -100.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.l0 >= 0:
            raise ValueError("l0 must be negative")

    @property
    def lambda_coef(self) -> float:
        return 1.0 / (1.0 - self.alpha)


def huber(delta: np.ndarray) -> np.ndarray:
    """0.5 x^2 inside the unit band, |x| - 0.5 outside."""
    a = np.abs(delta)
    return np.where(a <= 1.0, 0.5 * delta * delta, a - 0.5)


def huber_grad(delta: np.ndarray) -> np.ndarray:
    return np.clip(delta, -1.0, 1.0)


def _masks_for(env: EnvGraph, states) -> np.ndarray:
    """Action masks via the cached per-state table when one exists."""
    table = env.action_mask_table() if env.enumerable else None
    if table is not None:
        return table[np.asarray(states, dtype=np.int64)]
    return env.action_mask_batch(states)


class QModel:
    """A Q approximator bound to an environment's featurization.

    Networks consume encoded states (via a cached feature table when the
    environment is small enough); tabular approximators consume raw ids.
    """

    def __init__(self, net, env: EnvGraph):
        self.net = net
        self.env = env
        self._feature_table = None
        if net.kind == "mlp" and env.enumerable:
            if env.num_states * env.encoding_dim <= FEATURE_TABLE_CELL_CAP:
                self._feature_table = env.encoding_matrix()

    def q_values(self, states, mask: np.ndarray | None = None) -> np.ndarray:
        if self.net.kind == "tabular":
            return self.net.forward(states, mask)
        if self._feature_table is not None:
            x = self._feature_table[np.asarray(states, dtype=np.int64)]
        else:
            x = self.env.encode_batch(states)
        return self.net.forward(x, mask)

    def backward(self, dq: np.ndarray) -> np.ndarray:
        return self.net.backward(dq)


class NetPolicy:
    """Forward policy induced by a Q-model: tempered softmax of masked rows."""

    def __init__(self, model: QModel, lambda_coef: float = 1.0):
        self.model = model
        self.lambda_coef = float(lambda_coef)

    def action_probs(self, states) -> np.ndarray:
        states = self.model.env.id_array(states)
        mask = _masks_for(self.model.env, states)
        q = self.model.q_values(states, mask)
        return masked_softmax(q, mask, self.lambda_coef)

    def row(self, s: int) -> np.ndarray:
        env = self.model.env
        probs = self.action_probs([s])[0]
        actions = np.fromiter((a for a, _ in env.children(s)), np.int64)
        return probs[actions]

    def edge_log_prob(self, env: EnvGraph, s: int, s_next: int) -> float:
        kids = env.children(s)
        for j, (_, child) in enumerate(kids):
            if child == s_next:
                return float(np.log(self.row(s)[j]))
        raise ValueError(f"({s}, {s_next}) is not an edge")

    def sample_child(self, env: EnvGraph, s: int, rng: np.random.Generator) -> int:
        kids = env.children(s)
        j = rng.choice(len(kids), p=self.row(s))
        return int(kids[j][1])

    def tabular(self) -> TabularPolicy:
        """Exact per-state probability rows for dynamic-programming eval."""
        env = self.model.env
        adj = adjacency(env)
        rows: list = [None] * env.num_states
        nonterminal = np.flatnonzero(~adj.terminal_mask)
        for chunk in np.array_split(nonterminal, max(1, len(nonterminal) // 4096)):
            probs = self.action_probs(chunk)
            for s, p in zip(chunk, probs):
                rows[int(s)] = p[adj.actions[int(s)]]
        return TabularPolicy(rows=rows)


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row."""
    probs = probs / probs.sum(axis=1, keepdims=True)
    u = rng.random((len(probs), 1))
    picks = (np.cumsum(probs, axis=1) <= u).sum(axis=1)
    return np.minimum(picks, probs.shape[1] - 1)


# On tiny state spaces one full-table forward per iteration beats many
# per-batch forwards; the gathered rows are bitwise identical either way.
DENSE_TABLE_STATE_CAP = 4096


def _dense_eligible(env: EnvGraph) -> bool:
    return env.enumerable and env.num_states <= DENSE_TABLE_STATE_CAP


def _dense_action_probs(
    model: QModel, lam: float, epsilon: float
) -> np.ndarray:
    """Behavior-policy rows for every non-terminal state, one forward pass."""
    env = model.env
    mask_table = env.action_mask_table()
    alive = np.flatnonzero(mask_table.any(axis=1))
    mask = mask_table[alive]
    probs = masked_softmax(model.q_values(alive, mask), mask, lam)
    if epsilon > 0.0:
        uniform = mask / mask.sum(axis=1, keepdims=True)
        probs = (1.0 - epsilon) * probs + epsilon * uniform
    table = np.zeros((env.num_states, env.num_actions))
    table[alive] = probs
    return table


def _dense_target_tables(target: QModel, mdp: SoftMdp):
    """Target Q rows and tempered values for every non-terminal state."""
    env = mdp.env
    mask_table = env.action_mask_table()
    alive = np.flatnonzero(mask_table.any(axis=1))
    mask = mask_table[alive]
    q = target.q_values(alive, mask)
    v = masked_logsumexp(q, mask, mdp.lambda_coef)
    q_table = np.full((env.num_states, env.num_actions), 0.0)
    q_table[alive] = q
    v_table = np.zeros(env.num_states)
    v_table[alive] = v
    return q_table, v_table


def rollout(
    mdp: SoftMdp,
    model: QModel,
    num_trajectories: int,
    epsilon: float,
    rng: np.random.Generator,
    lambda_coef: float | None = None,
) -> list[Trajectory]:
    """Sample complete trajectories with the behavior policy.

    Each step draws from the tempered softmax over masked Q-values, mixed
    with the uniform distribution over valid actions with weight epsilon.
    Rollouts stop at terminal states; the forced sink step is implicit.
    """
    env = mdp.env
    lam = mdp.lambda_coef if lambda_coef is None else lambda_coef
    probs_table = (
        _dense_action_probs(model, lam, epsilon) if _dense_eligible(env) else None
    )
    states_hist = [[env.initial_state] for _ in range(num_trajectories)]
    actions_hist: list[list[int]] = [[] for _ in range(num_trajectories)]
    current = env.id_array([env.initial_state] * num_trajectories)
    alive = np.arange(num_trajectories)
    while len(alive):
        batch = current[alive]
        if probs_table is not None:
            probs = probs_table[batch]
        else:
            mask = _masks_for(env, batch)
            q = model.q_values(batch, mask)
            probs = masked_softmax(q, mask, lam)
            if epsilon > 0.0:
                uniform = mask / mask.sum(axis=1, keepdims=True)
                probs = (1.0 - epsilon) * probs + epsilon * uniform
        actions = _sample_rows(probs, rng)
        nxt = env.step_batch(batch, actions)
        for row, traj in enumerate(alive):
            actions_hist[traj].append(int(actions[row]))
            states_hist[traj].append(int(nxt[row]))
        current[alive] = nxt
        alive = alive[~env.is_terminal_batch(nxt)]
    return [
        Trajectory(states=tuple(s), actions=tuple(a))
        for s, a in zip(states_hist, actions_hist)
    ]


def transitions_from(trajectories) -> list[Transition]:
    """Interior transitions of complete trajectories (sink steps omitted:
    the target computation substitutes terminal values in closed form)."""
    out = []
    for t in trajectories:
        for i, a in enumerate(t.actions):
            out.append(
                Transition(
                    state=t.states[i],
                    action=a,
                    next_state=t.states[i + 1],
                    gfn_reward=0.0,
                    done=0,
                )
            )
    return out


def _target_values(
    s, a, nxt, done, gfn_reward, target: QModel, mdp: SoftMdp, munchausen=None, dense=None
) -> np.ndarray:
    env = mdp.env
    lam = mdp.lambda_coef
    n = len(a)
    reward = np.zeros(n)
    live = np.flatnonzero(done == 0)
    ended = np.flatnonzero(done != 0)
    if len(live):
        reward[live] = mdp.interior_log_pb(s[live], nxt[live])
    if len(ended):
        reward[ended] = np.log(gfn_reward[ended])
    next_value = np.zeros(n)
    if len(live):
        terminal_next = env.is_terminal_batch(nxt[live])
        hit = live[terminal_next]
        if len(hit):
            next_value[hit] = env.log_reward_batch(nxt[hit])
        deep = live[~terminal_next]
        if len(deep):
            if dense is not None:
                next_value[deep] = dense[1][nxt[deep]]
            else:
                mask = _masks_for(env, nxt[deep])
                q = target.q_values(nxt[deep], mask)
                next_value[deep] = masked_logsumexp(q, mask, lam)
    y = reward + (1.0 - done) * next_value
    if munchausen is not None and len(live):
        if dense is not None:
            scaled_log_pi = dense[0][s[live], a[live]] - dense[1][s[live]]
        else:
            mask = _masks_for(env, s[live])
            q = target.q_values(s[live], mask)
            value = masked_logsumexp(q, mask, lam)
            scaled_log_pi = q[np.arange(len(live)), a[live]] - value
        y[live] = y[live] + munchausen.alpha * np.maximum(scaled_log_pi, munchausen.l0)
    if not np.isfinite(y).all():
        raise TrainingDiverged("non-finite TD target")
    return y


def td_targets(
    transitions, target: QModel, mdp: SoftMdp, munchausen: MunchausenParams | None = None
) -> np.ndarray:
    """TD targets for a batch of transitions, never differentiated.

    Interior steps pay the log backward probability and bootstrap through
    the target network's tempered log-sum-exp (replaced by the exact log
    reward when the next state is terminal).  Steps out of terminal states
    (if a pipeline stores them) pay the log reward alone.  The Munchausen
    term adds the truncated scaled log-policy of the taken action.
    """
    env = mdp.env
    s = env.id_array([t.state for t in transitions])
    a = np.array([t.action for t in transitions], dtype=np.int64)
    nxt = env.id_array([t.next_state for t in transitions])
    done = np.array([t.done for t in transitions], dtype=float)
    gfn_reward = np.array([t.gfn_reward for t in transitions], dtype=float)
    return _target_values(s, a, nxt, done, gfn_reward, target, mdp, munchausen)


def soft_backup_sweep(mdp: SoftMdp, table: TabularQ, munchausen=None) -> None:
    """One synchronous Bellman backup over every interior edge, writing the
    TD target of each (state, action) straight into the table.  On a DAG
    of depth L, L sweeps reproduce the exact optimum."""
    env = mdp.env
    adj = adjacency(env)
    frozen = QModel(table.copy(), env)
    done = np.zeros(len(adj.edge_src))
    y = _target_values(
        adj.edge_src, adj.edge_action, adj.edge_dst, done, done, frozen, mdp, munchausen
    )
    table.table[adj.edge_src, adj.edge_action] = y


class _EvalLoop:
    """Shared bookkeeping for training loops: sample window, mode tracking,
    loss averaging, and cadenced metric rows."""

    def __init__(self, env, eval_every, window_size, seed, mode_delta, wall_clock):
        self.env = env
        self.window = SampleWindow(window_size)
        self.metrics = RunMetrics(seed)
        self.target = exact_partition(env)[1] if env.enumerable else None
        self.modes = ModeTracker(env, mode_delta) if isinstance(env, BitSequence) else None
        self.eval_every = int(eval_every)
        self.next_eval = int(eval_every)
        self.clock = time.perf_counter if wall_clock else None
        self.start = self.clock() if self.clock else 0.0
        self._loss_sum = 0.0
        self._loss_count = 0

    def observe(self, terminals, loss: float | None) -> None:
        self.window.add(terminals)
        if self.modes is not None:
            self.modes.update(terminals)
        if loss is not None:
            self._loss_sum += loss
            self._loss_count += 1

    def maybe_record(self, trajectories_seen: int, policy_provider, final: bool) -> None:
        if trajectories_seen < self.next_eval and not final:
            return
        if self.metrics.rows and self.metrics.rows[-1].trajectories == trajectories_seen:
            return
        l1 = tv = None
        if self.target is not None and len(self.window):
            l1 = l1_distance(self.window, self.target)
        if self.target is not None and policy_provider is not None:
            dist = terminal_distribution(self.env, policy_provider())
            tv = total_variation(dist, self.target)
        loss = self._loss_sum / self._loss_count if self._loss_count else None
        seconds = (self.clock() - self.start) if self.clock else 0.0
        self.metrics.add(
            trajectories_seen,
            l1,
            tv,
            loss,
            self.modes.count if self.modes is not None else None,
            seconds,
        )
        self._loss_sum = 0.0
        self._loss_count = 0
        self.next_eval = (trajectories_seen // self.eval_every + 1) * self.eval_every


class SoftDqnSampler(BaseEstimator):
    """Replay-based soft Q-learning sampler for flow DAGs.

    After ``fit(env)`` the tempered softmax of the learned Q-function is
    the sampler's forward policy; ``sample`` draws terminal states from
    it and ``policy_rows`` exposes the exact per-state action
    distributions for dynamic-programming evaluation.

    With ``munchausen_alpha > 0`` this is the Munchausen variant: the
    target gains the truncated scaled log-policy bonus and the softmax
    temperature becomes 1 / (1 - alpha).  ``use_replay=False`` with
    ``loss="mse"`` gives the simplified on-policy variant that regresses
    each iteration's own transitions without prioritization.
    """

    _method_name = "softdqn"

    def __init__(
        self,
        budget: int = 200_000,
        batch_trajectories: int = 16,
        batch_size: int = 256,
        lr: float = 1e-3,
        epsilon: float = 0.0,
        buffer_capacity: int = 100_000,
        per_alpha: float = 0.5,
        per_beta: float = 0.0,
        per_eps: float = 1e-6,
        target_update_period: int = 1,
        tau: float = 0.25,
        hard_updates: bool = False,
        hidden_sizes=(256, 256),
        activation: str = "leaky_relu",
        dueling: bool = False,
        approximator: str = "mlp",
        terminal_loss_weight: float = 1.0,
        loss: str = "huber",
        use_replay: bool = True,
        munchausen_alpha: float = 0.0,
        munchausen_l0: float = -100.0,
        eval_every: int = 2000,
        window_size: int = 200_000,
        mode_delta: int | None = None,
        wall_clock: bool = False,
        seed: int = 0,
    ):
        self.budget = budget
        self.batch_trajectories = batch_trajectories
        self.batch_size = batch_size
        self.lr = lr
        self.epsilon = epsilon
        self.buffer_capacity = buffer_capacity
        self.per_alpha = per_alpha
        self.per_beta = per_beta
        self.per_eps = per_eps
        self.target_update_period = target_update_period
        self.tau = tau
        self.hard_updates = hard_updates
        self.hidden_sizes = hidden_sizes
        self.activation = activation
        self.dueling = dueling
        self.approximator = approximator
        self.terminal_loss_weight = terminal_loss_weight
        self.loss = loss
        self.use_replay = use_replay
        self.munchausen_alpha = munchausen_alpha
        self.munchausen_l0 = munchausen_l0
        self.eval_every = eval_every
        self.window_size = window_size
        self.mode_delta = mode_delta
        self.wall_clock = wall_clock
        self.seed = seed

    @property
    def lambda_coef(self) -> float:
        return 1.0 / (1.0 - self.munchausen_alpha)

    def _validate(self, env) -> None:
        check_env(env)
        check_positive("budget", self.budget)
        check_positive("batch_trajectories", self.batch_trajectories)
        check_positive("batch_size", self.batch_size)
        check_positive("lr", self.lr)
        check_unit_interval("epsilon", self.epsilon)
        check_unit_interval("munchausen_alpha", self.munchausen_alpha)
        check_positive("target_update_period", self.target_update_period)
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.loss not in ("huber", "mse"):
            raise ValueError("loss must be 'huber' or 'mse'")
        if self.approximator not in ("mlp", "tabular"):
            raise ValueError("approximator must be 'mlp' or 'tabular'")
        if self.terminal_loss_weight < 1.0:
            raise ValueError("terminal_loss_weight must be >= 1")

    def _build_net(self, env, rng):
        if self.approximator == "tabular":
            check_env(env, enumerable=True)
            return TabularQ(env.num_states, env.num_actions)
        return Mlp(
            env.encoding_dim,
            env.num_actions,
            tuple(self.hidden_sizes),
            self.activation,
            seed=self.seed,
            rng=rng,
            dueling=self.dueling,
            lambda_coef=self.lambda_coef,
        )

    def fit(self, env: EnvGraph) -> "SoftDqnSampler":
        self._validate(env)
        lam = self.lambda_coef
        mdp = SoftMdp(env, UniformBackward(), lam)
        munchausen = (
            MunchausenParams(self.munchausen_alpha, self.munchausen_l0)
            if self.munchausen_alpha != 0.0
            else None
        )
        rollout_rng = stream_rng(self.seed, "rollout")
        replay_rng = stream_rng(self.seed, "replay")
        net = self._build_net(env, stream_rng(self.seed, "init"))
        model = QModel(net, env)
        target_net = net.copy()
        target = QModel(target_net, env)
        buffer = (
            PerBuffer(self.buffer_capacity, self.per_alpha, self.per_beta, self.per_eps)
            if self.use_replay
            else None
        )
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
            (lambda: NetPolicy(model, lam).tabular()) if env.enumerable else None
        )

        seen = 0
        iteration = 0
        while seen < self.budget:
            iteration += 1
            m = min(self.batch_trajectories, self.budget - seen)
            trajectories = rollout(mdp, model, m, self.epsilon, rollout_rng, lam)
            seen += m
            transitions = transitions_from(trajectories)
            loss_value = None
            if buffer is not None:
                buffer.extend(transitions)
                if len(buffer) >= self.batch_size:
                    loss_value = self._replay_step(
                        mdp, model, target, buffer, replay_rng, adam, munchausen
                    )
            else:
                loss_value = self._direct_step(
                    mdp, model, target, transitions, adam, munchausen
                )
            if iteration % self.target_update_period == 0:
                if self.hard_updates:
                    target_net.set_flat(net.theta)
                else:
                    polyak_update(target_net.theta, net.theta, self.tau)
            evals.observe([t.terminal for t in trajectories], loss_value)
            evals.maybe_record(seen, policy_provider, final=seen >= self.budget)

        self.env_ = env
        self.mdp_ = mdp
        self.qnet_ = net
        self.model_ = model
        self.buffer_ = buffer
        self.metrics_ = evals.metrics
        self.window_ = evals.window
        self.modes_ = evals.modes
        self.n_iterations_ = iteration
        return self

    def _per_item_loss(self, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.loss == "huber":
            return huber(delta), huber_grad(delta)
        return delta * delta, 2.0 * delta

    def _gradient_step(
        self, mdp, model, target, transitions, weights, adam, munchausen
    ) -> tuple[float, np.ndarray]:
        env = mdp.env
        s = env.id_array([t.state for t in transitions])
        a = np.array([t.action for t in transitions], dtype=np.int64)
        nxt = env.id_array([t.next_state for t in transitions])
        done = np.array([t.done for t in transitions], dtype=float)
        gfn_reward = np.array([t.gfn_reward for t in transitions], dtype=float)
        dense = _dense_target_tables(target, mdp) if _dense_eligible(env) else None
        y = _target_values(s, a, nxt, done, gfn_reward, target, mdp, munchausen, dense)
        mask = _masks_for(env, s)
        q = model.q_values(s, mask)
        rows = np.arange(len(a))
        delta = q[rows, a] - y
        per_item, per_item_grad = self._per_item_loss(delta)
        if self.terminal_loss_weight != 1.0:
            weights = weights * np.where(
                env.is_terminal_batch(nxt), self.terminal_loss_weight, 1.0
            )
        loss = float((weights * per_item).mean())
        if not np.isfinite(loss):
            raise TrainingDiverged("non-finite loss")
        dq = np.zeros_like(q)
        dq[rows, a] = weights * per_item_grad / len(a)
        grad = model.backward(dq)
        adam_step(model.net.theta, grad, adam, self.lr)
        return loss, per_item

    def _replay_step(self, mdp, model, target, buffer, rng, adam, munchausen) -> float:
        batch = buffer.sample(self.batch_size, rng)
        loss, per_item = self._gradient_step(
            mdp, model, target, batch.transitions, batch.weights, adam, munchausen
        )
        buffer.update_priorities(batch.indices, per_item, batch.stamps)
        return loss

    def _direct_step(self, mdp, model, target, transitions, adam, munchausen) -> float:
        weights = np.ones(len(transitions))
        loss, _ = self._gradient_step(
            mdp, model, target, transitions, weights, adam, munchausen
        )
        return loss

    # -- the fitted sampler ---------------------------------------------------

    def forward_policy(self) -> NetPolicy:
        return NetPolicy(self.model_, self.lambda_coef)

    def policy_rows(self) -> TabularPolicy:
        return self.forward_policy().tabular()

    def predict_proba(self, states) -> np.ndarray:
        """Action distributions over the full canonical action layout."""
        return self.forward_policy().action_probs(states)

    def sample(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """Draw terminal states from the learned forward policy."""
        rng = rng if rng is not None else stream_rng(self.seed, "sample")
        trajectories = rollout(self.mdp_, self.model_, n, 0.0, rng, self.lambda_coef)
        return self.env_.id_array([t.terminal for t in trajectories])

    def exact_distribution(self) -> dict[int, float]:
        return terminal_distribution(self.env_, self.policy_rows())

    def save(self, prefix) -> None:
        save_checkpoint(prefix, self.qnet_)


class MunchausenDqnSampler(SoftDqnSampler):
    """Soft Q-learning with the Munchausen log-policy bonus.

    Identical machinery with defaults matching the grid study: bonus
    weight 0.15, truncation -100, temperature 1 / (1 - 0.15).
    """

    _method_name = "mdqn"

    def __init__(
        self,
        budget: int = 200_000,
        batch_trajectories: int = 16,
        batch_size: int = 256,
        lr: float = 1e-3,
        epsilon: float = 0.0,
        buffer_capacity: int = 100_000,
        per_alpha: float = 0.5,
        per_beta: float = 0.0,
        per_eps: float = 1e-6,
        target_update_period: int = 1,
        tau: float = 0.25,
        hard_updates: bool = False,
        hidden_sizes=(256, 256),
        activation: str = "leaky_relu",
        dueling: bool = False,
        approximator: str = "mlp",
        terminal_loss_weight: float = 1.0,
        loss: str = "huber",
        use_replay: bool = True,
        munchausen_alpha: float = 0.15,
        munchausen_l0: float = -100.0,
        eval_every: int = 2000,
        window_size: int = 200_000,
        mode_delta: int | None = None,
        wall_clock: bool = False,
        seed: int = 0,
    ):
        super().__init__(
            budget=budget,
            batch_trajectories=batch_trajectories,
            batch_size=batch_size,
            lr=lr,
            epsilon=epsilon,
            buffer_capacity=buffer_capacity,
            per_alpha=per_alpha,
            per_beta=per_beta,
            per_eps=per_eps,
            target_update_period=target_update_period,
            tau=tau,
            hard_updates=hard_updates,
            hidden_sizes=hidden_sizes,
            activation=activation,
            dueling=dueling,
            approximator=approximator,
            terminal_loss_weight=terminal_loss_weight,
            loss=loss,
            use_replay=use_replay,
            munchausen_alpha=munchausen_alpha,
            munchausen_l0=munchausen_l0,
            eval_every=eval_every,
            window_size=window_size,
            mode_delta=mode_delta,
            wall_clock=wall_clock,
            seed=seed,
        )
