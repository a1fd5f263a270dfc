"""Exact dynamic programming over enumerable environments.

Two independent recursions live here: the soft Bellman solve (log space,
backward induction over a topological order) and the flow recursion
(linear space, driven only by the backward policy and terminal rewards).
Their agreement, optimal values matching log state flows and optimal
Q-values matching log edge flows, is the central identity this package
certifies numerically, together with the value-equals-log-partition-
minus-KL expression for arbitrary policies and the equivalence between
the on-policy trajectory-balance gradient and the policy gradient.

All log-space arithmetic is 64-bit; the stated tolerances assume that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import exact_partition
from .graphs import (
    CapacityError,
    EnvGraph,
    Trajectory,
    ensure_enumerable,
    reachable_states,
    topo_order,
)
from .mdp import SoftMdp, UniformBackward
from .rng import stream_rng

TRAJECTORY_CAP = 1_000_000


def logsumexp_t(values, lam: float = 1.0, axis=None):
    """Max-shifted log-sum-exp with temperature: lam * log sum exp(x / lam)."""
    values = np.asarray(values, dtype=float)
    if axis is None:
        m = float(np.max(values))
        return m + lam * float(np.log(np.exp((values - m) / lam).sum()))
    m = np.max(values, axis=axis, keepdims=True)
    return m.squeeze(axis) + lam * np.log(np.exp((values - m) / lam).sum(axis=axis))


class Adjacency:
    """Flattened structural arrays of an enumerable DAG.

    Edges are stored contiguously in state order; ``row_start[s]`` and
    ``row_width[s]`` address the block of state ``s``'s outgoing edges in
    ``edge_src`` / ``edge_dst``.  ``child_pos[s, a]`` recovers the position
    of action ``a`` within that block.  Built once per environment and
    cached on the instance.
    """

    def __init__(self, env: EnvGraph):
        ensure_enumerable(env)
        n = env.num_states
        self.actions: list = [None] * n
        self.children: list = [None] * n
        self.row_start = np.zeros(n, dtype=np.int64)
        self.row_width = np.zeros(n, dtype=np.int64)
        self.child_pos = np.full((n, env.num_actions), -1, dtype=np.int64)
        src_blocks, dst_blocks, act_blocks = [], [], []
        offset = 0
        for s in range(n):
            kids = env.children(s)
            if not kids:
                self.row_start[s] = -1
                continue
            acts = np.fromiter((a for a, _ in kids), np.int64, len(kids))
            dsts = np.fromiter((c for _, c in kids), np.int64, len(kids))
            self.actions[s], self.children[s] = acts, dsts
            self.row_start[s] = offset
            self.row_width[s] = len(kids)
            self.child_pos[s, acts] = np.arange(len(kids))
            src_blocks.append(np.full(len(kids), s, dtype=np.int64))
            dst_blocks.append(dsts)
            act_blocks.append(acts)
            offset += len(kids)
        self.edge_src = np.concatenate(src_blocks)
        self.edge_dst = np.concatenate(dst_blocks)
        self.edge_action = np.concatenate(act_blocks)
        self.num_edges = offset
        self.terminal_mask = self.row_start < 0
        self.order = topo_order(env)


def adjacency(env: EnvGraph) -> Adjacency:
    cached = getattr(env, "_adjacency_cache", None)
    if cached is None:
        cached = Adjacency(env)
        env._adjacency_cache = cached
    return cached


@dataclass
class ValueTable:
    """Optimal soft values per state and Q-values per outgoing edge.

    ``q_rows[s]`` aligns with ``env.children(s)``; terminal states carry
    their log reward in ``values`` and ``None`` in ``q_rows``.
    """

    values: np.ndarray
    q_rows: list
    lambda_coef: float


@dataclass
class FlowTable:
    """Markovian flow per state and per edge, in linear space.

    ``total_flow`` is the flow through the initial state; it equals the
    partition function of the terminal rewards.
    """

    state_flow: np.ndarray
    edge_rows: list
    total_flow: float


class TabularPolicy:
    """Explicit per-state action distributions, aligned with children order."""

    def __init__(self, rows: list):
        self.rows = rows

    def row(self, s: int) -> np.ndarray:
        return self.rows[s]

    def flat(self, env: EnvGraph) -> np.ndarray:
        """Concatenation of all rows in state order, matching Adjacency edges."""
        adj = adjacency(env)
        return np.concatenate(
            [self.rows[s] for s in range(env.num_states) if not adj.terminal_mask[s]]
        )

    def edge_log_prob(self, env: EnvGraph, s: int, s_next: int) -> float:
        adj = adjacency(env)
        matches = np.flatnonzero(adj.children[s] == s_next)
        if len(matches) != 1:
            raise ValueError(f"({s}, {s_next}) is not an edge")
        with np.errstate(divide="ignore"):  # -inf off the support is intended
            return float(np.log(self.rows[s][matches[0]]))

    def sample_child(self, env: EnvGraph, s: int, rng: np.random.Generator) -> int:
        adj = adjacency(env)
        j = rng.choice(len(adj.children[s]), p=self.rows[s])
        return int(adj.children[s][j])


def edge_log_pb(env: EnvGraph, backward=None) -> np.ndarray:
    """Log backward probability of every edge, in Adjacency order."""
    backward = backward if backward is not None else UniformBackward()
    adj = adjacency(env)
    return backward.log_prob_batch(env, adj.edge_src, adj.edge_dst)


def solve_soft_bellman(mdp: SoftMdp, lam: float | None = None) -> ValueTable:
    """One backward-induction pass of the soft Bellman equations.

    Terminal states seed the recursion with their log reward (their single
    sink action pays exactly that); every interior Q-value is the edge
    reward plus the child's value, and the state value is the tempered
    log-sum-exp over the Q row.
    """
    env = mdp.env
    lam = mdp.lambda_coef if lam is None else lam
    adj = adjacency(env)
    log_pb = edge_log_pb(env, mdp.backward)
    values = np.zeros(env.num_states)
    terminals = np.flatnonzero(adj.terminal_mask)
    values[terminals] = env.log_reward_batch(terminals)
    q_rows: list = [None] * env.num_states
    for s in reversed(adj.order):
        s = int(s)
        if adj.terminal_mask[s]:
            continue
        start, width = adj.row_start[s], adj.row_width[s]
        q = log_pb[start : start + width] + values[adj.children[s]]
        q_rows[s] = q
        values[s] = logsumexp_t(q, lam)
    return ValueTable(values=values, q_rows=q_rows, lambda_coef=lam)


def compute_flows(env: EnvGraph, backward=None) -> FlowTable:
    """Markovian flow implied by the backward policy and terminal rewards.

    Purely linear-space: edge flow is backward probability times child
    flow, state flow is the sum over outgoing edges.  Independent of the
    Bellman solve, which is the point.
    """
    backward = backward if backward is not None else UniformBackward()
    adj = adjacency(env)
    pb = backward.prob_batch(env, adj.edge_src, adj.edge_dst)
    state_flow = np.zeros(env.num_states)
    terminals = np.flatnonzero(adj.terminal_mask)
    state_flow[terminals] = env.reward_batch(terminals)
    edge_rows: list = [None] * env.num_states
    for s in reversed(adj.order):
        s = int(s)
        if adj.terminal_mask[s]:
            continue
        start, width = adj.row_start[s], adj.row_width[s]
        edge_rows[s] = pb[start : start + width] * state_flow[adj.children[s]]
        state_flow[s] = edge_rows[s].sum()
    return FlowTable(
        state_flow=state_flow,
        edge_rows=edge_rows,
        total_flow=float(state_flow[env.initial_state]),
    )


def extract_policy(env: EnvGraph, table: ValueTable, lam: float | None = None) -> TabularPolicy:
    """The tempered-softmax policy of a solved value table."""
    lam = table.lambda_coef if lam is None else lam
    rows: list = [None] * env.num_states
    for s in range(env.num_states):
        q = table.q_rows[s]
        if q is not None:
            rows[s] = np.exp((q - table.values[s]) / lam)
    return TabularPolicy(rows=rows)


def policy_values(mdp: SoftMdp, policy: TabularPolicy, lam: float | None = None) -> np.ndarray:
    """Exact entropy-augmented values of an arbitrary policy, all states."""
    env = mdp.env
    lam = mdp.lambda_coef if lam is None else lam
    adj = adjacency(env)
    log_pb = edge_log_pb(env, mdp.backward)
    values = np.zeros(env.num_states)
    terminals = np.flatnonzero(adj.terminal_mask)
    values[terminals] = env.log_reward_batch(terminals)
    for s in reversed(adj.order):
        s = int(s)
        if adj.terminal_mask[s]:
            continue
        start, width = adj.row_start[s], adj.row_width[s]
        p = np.asarray(policy.rows[s], dtype=float)
        gain = log_pb[start : start + width] + values[adj.children[s]]
        on = p > 0
        values[s] = float(p[on] @ (gain[on] - lam * np.log(p[on])))
    return values


def policy_eval_exact(mdp: SoftMdp, policy: TabularPolicy, lam: float | None = None) -> float:
    """Exact entropy-augmented value of the initial state."""
    return float(policy_values(mdp, policy, lam)[mdp.env.initial_state])


def visit_probabilities(env: EnvGraph, policy: TabularPolicy) -> np.ndarray:
    """Probability that each state occurs on a policy trajectory (states
    repeat at most once on any path of a DAG), by a forward push."""
    adj = adjacency(env)
    mass = np.zeros(env.num_states)
    mass[env.initial_state] = 1.0
    for s in adj.order:
        s = int(s)
        if adj.terminal_mask[s] or mass[s] == 0.0:
            continue
        np.add.at(mass, adj.children[s], mass[s] * policy.rows[s])
    return mass


def terminal_distribution(env: EnvGraph, policy: TabularPolicy) -> dict[int, float]:
    """Exact distribution over terminal states induced by a policy."""
    mass = visit_probabilities(env, policy)
    return {x: float(mass[x]) for x in env.terminal_states()}


def count_trajectories(env: EnvGraph) -> float:
    """Number of complete trajectories, by a path-counting forward push
    (float64, so astronomically many paths saturate instead of wrapping)."""
    adj = adjacency(env)
    counts = np.zeros(env.num_states)
    counts[env.initial_state] = 1.0
    for s in adj.order:
        s = int(s)
        if not adj.terminal_mask[s]:
            np.add.at(counts, adj.children[s], counts[s])
    return float(counts[adj.terminal_mask].sum())


class TrajectorySet:
    """Every complete trajectory of an enumerable DAG, flattened for
    vectorized per-policy computations."""

    def __init__(self, env: EnvGraph, backward=None, cap: int = TRAJECTORY_CAP):
        backward = backward if backward is not None else UniformBackward()
        self.env = env
        adj = adjacency(env)
        total = count_trajectories(env)
        if total > cap:
            raise CapacityError(f"{total:.3g} trajectories, over the cap of {cap}")
        trajectories: list[Trajectory] = []
        # Iterative depth-first expansion in canonical action order.
        stack = [(env.initial_state, (env.initial_state,), ())]
        while stack:
            s, states, actions = stack.pop()
            if adj.terminal_mask[s]:
                trajectories.append(Trajectory(states=states, actions=actions))
                if len(trajectories) > cap:
                    raise CapacityError(f"more than {cap} trajectories")
                continue
            for a, nxt in zip(adj.actions[s][::-1], adj.children[s][::-1]):
                stack.append((int(nxt), states + (int(nxt),), actions + (int(a),)))
        self.trajectories = trajectories
        self.flat_states = np.concatenate(
            [np.array(t.states[:-1], dtype=np.int64) for t in trajectories]
        )
        self.flat_actions = np.concatenate(
            [np.array(t.actions, dtype=np.int64) for t in trajectories]
        )
        lengths = np.array([len(t) for t in trajectories], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        self.traj_of_step = np.repeat(np.arange(len(trajectories)), lengths)
        self.terminals = np.array([t.terminal for t in trajectories], dtype=np.int64)
        self.log_rewards = env.log_reward_batch(self.terminals)
        flat_next = np.concatenate(
            [np.array(t.states[1:], dtype=np.int64) for t in trajectories]
        )
        step_log_pb = backward.log_prob_batch(env, self.flat_states, flat_next)
        self.log_pb_sums = np.add.reduceat(step_log_pb, self.offsets)
        self.flat_child_pos = adj.child_pos[self.flat_states, self.flat_actions]
        self.flat_edge_idx = adj.row_start[self.flat_states] + self.flat_child_pos

    def __len__(self) -> int:
        return len(self.trajectories)

    def log_q(self, policy: TabularPolicy) -> np.ndarray:
        """Log probability of each trajectory under a tabular policy."""
        flat = policy.flat(self.env)
        with np.errstate(divide="ignore"):
            steps = np.log(flat[self.flat_edge_idx])
        return np.add.reduceat(steps, self.offsets)


def check_prop_value_kl(
    mdp: SoftMdp,
    policy: TabularPolicy,
    trajectory_set: TrajectorySet | None = None,
) -> tuple[float, float]:
    """Both sides of: value at the start = log Z - KL(policy paths || reward-
    weighted backward paths).  Left side by exact policy evaluation, right
    side by full trajectory enumeration."""
    env = mdp.env
    ts = trajectory_set if trajectory_set is not None else TrajectorySet(env, mdp.backward)
    lhs = policy_eval_exact(mdp, policy, lam=1.0)
    z, _ = exact_partition(env)
    log_q = ts.log_q(policy)
    q = np.exp(log_q)
    log_target = ts.log_rewards + ts.log_pb_sums - np.log(z)
    visited = q > 0  # trajectories off the policy's support contribute 0
    kl = float((q[visited] * (log_q[visited] - log_target[visited])).sum())
    return lhs, float(np.log(z) - kl)


# -- tabular softmax parameterization and the TB / policy-gradient check ----


class TabularLogits:
    """Free logits per non-terminal state, flattened into one vector
    aligned with the Adjacency edge order."""

    def __init__(self, env: EnvGraph, values: np.ndarray | None = None):
        self.env = env
        adj = adjacency(env)
        self.size = adj.num_edges
        self.theta = np.zeros(self.size) if values is None else np.asarray(values, float)
        if self.theta.shape != (self.size,):
            raise ValueError(f"expected a flat vector of {self.size} logits")

    def row(self, s: int) -> np.ndarray:
        adj = adjacency(self.env)
        start, width = adj.row_start[s], adj.row_width[s]
        return self.theta[start : start + width]

    def policy(self) -> TabularPolicy:
        adj = adjacency(self.env)
        rows: list = [None] * self.env.num_states
        for s in range(self.env.num_states):
            if not adj.terminal_mask[s]:
                z = self.row(s)
                p = np.exp(z - np.max(z))
                rows[s] = p / p.sum()
        return TabularPolicy(rows=rows)


def value_gradient(mdp: SoftMdp, logits: TabularLogits) -> np.ndarray:
    """Exact gradient of the soft value at the start w.r.t. tabular logits.

    Dynamic programming only: the derivative of the value recursion at
    state s contributes its local softmax Jacobian term weighted by the
    probability that s is visited at all, so one backward value pass and
    one forward reach pass suffice.
    """
    env = mdp.env
    adj = adjacency(env)
    policy = logits.policy()
    values = policy_values(mdp, policy, lam=1.0)
    log_pb = edge_log_pb(env, mdp.backward)
    visits = visit_probabilities(env, policy)
    grad = np.zeros(logits.size)
    for s in range(env.num_states):
        if adj.terminal_mask[s] or visits[s] == 0.0:
            continue
        start, width = adj.row_start[s], adj.row_width[s]
        p = policy.rows[s]
        coef = log_pb[start : start + width] + values[adj.children[s]] - np.log(p)
        # d p_j / d z_k = p_j (delta_jk - p_k) on this state's own logits
        grad[start : start + width] = visits[s] * (p * coef - p * float(p @ coef))
    return grad


def tb_gradient_expectation(
    mdp: SoftMdp,
    logits: TabularLogits,
    log_z: float = 0.0,
    trajectory_set: TrajectorySet | None = None,
) -> np.ndarray:
    """Half the on-policy expectation of the trajectory-balance loss
    gradient, by exact enumeration (the sampling distribution is held
    fixed, only the loss is differentiated)."""
    env = mdp.env
    adj = adjacency(env)
    ts = trajectory_set if trajectory_set is not None else TrajectorySet(env, mdp.backward)
    policy = logits.policy()
    log_q = ts.log_q(policy)
    q = np.exp(log_q)
    residual = log_z + log_q - ts.log_rewards - ts.log_pb_sums
    # grad L_TB(tau) = 2 residual * sum over steps of (onehot(action) - row)
    coef = q * residual  # the 1/2 outside cancels the 2 here
    step_coef = coef[ts.traj_of_step]
    grad = np.zeros(logits.size)
    np.add.at(grad, ts.flat_edge_idx, step_coef)
    state_coef = np.zeros(env.num_states)
    np.add.at(state_coef, ts.flat_states, step_coef)
    for s in range(env.num_states):
        if not adj.terminal_mask[s] and state_coef[s] != 0.0:
            start, width = adj.row_start[s], adj.row_width[s]
            grad[start : start + width] -= state_coef[s] * policy.rows[s]
    return grad


def check_tb_policygrad_identity(
    mdp: SoftMdp,
    logits: TabularLogits,
    log_z: float = 0.0,
    trajectory_set: TrajectorySet | None = None,
) -> float:
    """Max-norm gap between the negated exact value gradient and half the
    expected trajectory-balance gradient."""
    lhs = -value_gradient(mdp, logits)
    rhs = tb_gradient_expectation(mdp, logits, log_z, trajectory_set)
    return float(np.max(np.abs(lhs - rhs)))


# -- balance residuals -------------------------------------------------------


def detailed_balance_residuals(
    env: EnvGraph, flows: FlowTable, policy: TabularPolicy, backward=None
) -> float:
    """Max log-space residual of state-flow times forward probability
    against child-flow times backward probability, over all edges."""
    adj = adjacency(env)
    log_pb = edge_log_pb(env, backward)
    log_f = np.log(flows.state_flow)
    res = (
        log_f[adj.edge_src]
        + np.log(policy.flat(env))
        - log_f[adj.edge_dst]
        - log_pb
    )
    return float(np.max(np.abs(res)))


def trajectory_balance_residuals(
    env: EnvGraph,
    policy: TabularPolicy,
    log_z: float,
    backward=None,
    trajectory_set: TrajectorySet | None = None,
) -> float:
    """Max log-space trajectory-balance residual over all trajectories."""
    ts = trajectory_set if trajectory_set is not None else TrajectorySet(env, backward)
    res = log_z + ts.log_q(policy) - ts.log_rewards - ts.log_pb_sums
    return float(np.max(np.abs(res)))


# -- the verification suite ---------------------------------------------------


def random_tabular_policy(env: EnvGraph, rng: np.random.Generator) -> TabularPolicy:
    """Strictly positive random policy: flat Dirichlet on every row."""
    adj = adjacency(env)
    gammas = rng.gamma(1.0, size=adj.num_edges)
    rows: list = [None] * env.num_states
    for s in range(env.num_states):
        if not adj.terminal_mask[s]:
            start, width = adj.row_start[s], adj.row_width[s]
            block = gammas[start : start + width]
            rows[s] = block / block.sum()
    return TabularPolicy(rows=rows)


def check_adjacency(env: EnvGraph) -> int:
    """Number of asymmetric edges (children without the matching parent
    entry or vice versa); zero on a consistent graph."""
    ensure_enumerable(env)
    bad = 0
    for s in range(env.num_states):
        for _, nxt in env.children(s):
            if env.parents(nxt).count(s) != 1:
                bad += 1
        for p in env.parents(s):
            if sum(1 for _, c in env.children(p) if c == s) != 1:
                bad += 1
    return bad


def oracle_report(
    env: EnvGraph,
    backward=None,
    n_random_policies: int = 100,
    n_random_logits: int = 20,
    seed: int = 0,
    trajectory_cap: int = TRAJECTORY_CAP,
) -> dict:
    """Run the full verification suite on one environment.

    Returns a JSON-friendly report: one entry per check with its measured
    maximum error and tolerance.  Trajectory-level checks are skipped
    (and marked so) when the trajectory count exceeds the cap.
    """
    backward = backward if backward is not None else UniformBackward()
    mdp = SoftMdp(env, backward)
    rng = stream_rng(seed, "oracle-report")
    checks: list[dict] = []

    def add(name: str, error: float, tol: float) -> None:
        checks.append(
            {
                "name": name,
                "max_error": float(error),
                "tolerance": tol,
                "passed": bool(error <= tol),
            }
        )

    add("adjacency_symmetry", check_adjacency(env), 0)
    add("reachability", env.num_states - int(reachable_states(env).sum()), 0)

    worst = 0.0
    for s in range(env.num_states):
        if s != env.initial_state:
            parents = np.array(env.parents(s), dtype=np.int64)
            total = backward.prob_batch(env, parents, np.full(len(parents), s)).sum()
            worst = max(worst, abs(total - 1.0))
    add("backward_normalization", worst, 1e-15)

    table = solve_soft_bellman(mdp)
    flows = compute_flows(env, backward)
    log_flow = np.log(flows.state_flow)
    add("value_vs_log_state_flow", np.max(np.abs(table.values - log_flow)), 1e-9)
    worst = 0.0
    for s in range(env.num_states):
        if table.q_rows[s] is not None:
            worst = max(
                worst,
                float(np.max(np.abs(table.q_rows[s] - np.log(flows.edge_rows[s])))),
            )
    add("q_vs_log_edge_flow", worst, 1e-9)

    z, _ = exact_partition(env)
    add("partition_vs_initial_flow", abs(flows.total_flow - z) / max(1.0, z), 1e-12)

    policy = extract_policy(env, table)
    worst = max(
        abs(float(policy.rows[s].sum()) - 1.0)
        for s in range(env.num_states)
        if policy.rows[s] is not None
    )
    add("optimal_policy_row_sums", worst, 1e-12)

    add(
        "detailed_balance_at_optimum",
        detailed_balance_residuals(env, flows, policy, backward),
        1e-9,
    )

    target = exact_partition(env)[1]
    dist = terminal_distribution(env, policy)
    worst = max(abs(dist[x] - target[x]) for x in dist)
    add("terminal_distribution_vs_target", worst, 1e-10)

    try:
        ts = TrajectorySet(env, backward, cap=trajectory_cap)
    except CapacityError:
        ts = None
        checks.append(
            {
                "name": "trajectory_checks",
                "max_error": float("nan"),
                "tolerance": float("nan"),
                "passed": True,
                "skipped": "trajectory count over cap",
            }
        )
    if ts is not None:
        add(
            "trajectory_balance_at_optimum",
            trajectory_balance_residuals(env, policy, np.log(z), backward, ts),
            1e-9,
        )

        worst = 0.0
        sandwich_violation = 0.0
        v_star = float(table.values[env.initial_state])
        for _ in range(n_random_policies):
            pi = random_tabular_policy(env, rng)
            lhs, rhs = check_prop_value_kl(mdp, pi, ts)
            worst = max(worst, abs(lhs - rhs))
            d_pi = terminal_distribution(env, pi)
            kl_marginal = sum(
                d_pi[x] * np.log(d_pi[x] / target[x]) for x in d_pi if d_pi[x] > 0
            )
            sandwich_violation = max(sandwich_violation, kl_marginal - (v_star - lhs))
        add("value_vs_log_z_minus_kl", worst, 1e-8)
        add("kl_sandwich", sandwich_violation, 1e-10)

        worst = 0.0
        n_logits = TabularLogits(env).size
        for _ in range(n_random_logits):
            logits = TabularLogits(env, rng.normal(size=n_logits))
            gap = check_tb_policygrad_identity(
                mdp, logits, log_z=float(rng.normal()), trajectory_set=ts
            )
            worst = max(worst, gap)
        add("tb_policy_gradient_identity", worst, 1e-6)

    return {
        "environment": type(env).__name__,
        "num_states": env.num_states,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
