import numpy as np
import pytest
from scipy import stats

from softflow import (
    HyperGrid,
    MunchausenDqnSampler,
    MunchausenParams,
    SoftDqnSampler,
    SoftMdp,
    TabularQ,
    Transition,
    rollout,
    soft_backup_sweep,
    solve_soft_bellman,
    td_targets,
)
from softflow.envs import BitSequence, exact_partition, random_modes
from softflow.metrics import total_variation
from softflow.oracle import adjacency, extract_policy
from softflow.training import NetPolicy, QModel, huber, transitions_from


def exact_tabular_model(env, lam=1.0):
    """Tabular Q filled with the exact optimum at temperature lam."""
    mdp = SoftMdp(env, lambda_coef=lam)
    table = solve_soft_bellman(mdp, lam=lam)
    adj = adjacency(env)
    net = TabularQ(env.num_states, env.num_actions)
    for s in range(env.num_states):
        if table.q_rows[s] is not None:
            net.table[s, adj.actions[s]] = table.q_rows[s]
    return QModel(net, env), table, mdp


class TestHuber:
    def test_quadratic_branch(self):
        assert huber(np.array([0.5]))[0] == pytest.approx(0.125)

    def test_linear_branch(self):
        assert huber(np.array([2.0]))[0] == pytest.approx(1.5)

    def test_continuity_at_kink(self):
        assert huber(np.array([1.0]))[0] == pytest.approx(0.5)


class TestTdTargets:
    def test_terminal_step_pays_log_reward(self, chain):
        mdp = SoftMdp(chain)
        model = QModel(TabularQ(chain.num_states, chain.num_actions), chain)
        t = Transition(state=1, action=0, next_state=2, gfn_reward=2.0, done=1)
        assert td_targets([t], model, mdp)[0] == pytest.approx(np.log(2.0))

    def test_interior_step_with_exact_target(self, diamond):
        model, table, mdp = exact_tabular_model(diamond)
        t = Transition(state=0, action=0, next_state=1, gfn_reward=0.0, done=0)
        # log PB(s0|a) = 0 and V*(a) = -log 2
        assert td_targets([t], model, mdp)[0] == pytest.approx(-np.log(2.0))

    def test_terminal_next_state_uses_exact_log_reward(self, chain):
        mdp = SoftMdp(chain)
        model = QModel(TabularQ(chain.num_states, chain.num_actions), chain)
        t = Transition(state=0, action=0, next_state=1, gfn_reward=0.0, done=0)
        # convention: next state is terminal, bootstrap with log R, not the table
        assert td_targets([t], model, mdp)[0] == pytest.approx(np.log(2.0))

    def test_munchausen_term_hand_value(self, diamond):
        params = MunchausenParams(alpha=0.15, l0=-100.0)
        mdp = SoftMdp(diamond, lambda_coef=params.lambda_coef)
        model = QModel(TabularQ(diamond.num_states, diamond.num_actions), diamond)
        t = Transition(state=0, action=0, next_state=1, gfn_reward=0.0, done=0)
        plain = td_targets([t], model, mdp)[0]
        boosted = td_targets([t], model, mdp, params)[0]
        # uniform target policy over two actions
        assert boosted - plain == pytest.approx(0.15 * (1 / 0.85) * np.log(0.5))

    def test_truncation_floor_applies(self, diamond):
        params = MunchausenParams(alpha=0.5, l0=-1e-3)
        mdp = SoftMdp(diamond, lambda_coef=params.lambda_coef)
        model = QModel(TabularQ(diamond.num_states, diamond.num_actions), diamond)
        t = Transition(state=0, action=0, next_state=1, gfn_reward=0.0, done=0)
        plain = td_targets([t], model, mdp)[0]
        boosted = td_targets([t], model, mdp, params)[0]
        assert boosted - plain == pytest.approx(0.5 * -1e-3)

    def test_alpha_zero_targets_bit_identical_to_plain(self, grid42, rng):
        model, _, _ = exact_tabular_model(grid42)
        model.net.table[:] += rng.normal(size=model.net.table.shape)
        mdp = SoftMdp(grid42, lambda_coef=1.0)
        trajectories = rollout(mdp, model, 32, 0.3, rng, 1.0)
        batch = transitions_from(trajectories)
        plain = td_targets(batch, model, mdp)
        zeroed = td_targets(batch, model, mdp, MunchausenParams(alpha=0.0, l0=-100.0))
        assert plain.tobytes() == zeroed.tobytes()

    def test_loss_vanishes_at_fixed_point(self, grid82):
        model, table, mdp = exact_tabular_model(grid82)
        adj = adjacency(grid82)
        done = np.zeros(len(adj.edge_src))
        batch = [
            Transition(int(s), int(a), int(nxt), 0.0, 0)
            for s, a, nxt in zip(adj.edge_src, adj.edge_action, adj.edge_dst)
        ]
        y = td_targets(batch, model, mdp)
        q_online = model.net.table[adj.edge_src, adj.edge_action]
        assert float(huber(q_online - y).max()) <= 1e-12


class TestTabularSweeps:
    def test_diamond_converges_exactly(self, diamond):
        mdp = SoftMdp(diamond)
        exact = solve_soft_bellman(mdp)
        adj = adjacency(diamond)
        table = TabularQ(diamond.num_states, diamond.num_actions)
        for _ in range(2):
            soft_backup_sweep(mdp, table)
        worst = max(
            np.max(np.abs(table.table[s, adj.actions[s]] - exact.q_rows[s]))
            for s in range(diamond.num_states)
            if exact.q_rows[s] is not None
        )
        assert worst <= 1e-6

    def test_munchausen_sweeps_recover_the_same_policy(self, grid42):
        """Iterating the boosted backup at temperature 1/(1-alpha) converges,
        and its tempered softmax equals the unregularized-optimum policy:
        the bonus is exactly compensated."""
        params = MunchausenParams(alpha=0.15, l0=-100.0)
        mdp = SoftMdp(grid42, lambda_coef=params.lambda_coef)
        table = TabularQ(grid42.num_states, grid42.num_actions)
        previous = table.table.copy()
        for _ in range(400):
            soft_backup_sweep(mdp, table, params)
            delta = np.max(np.abs(table.table - previous))
            previous = table.table.copy()
        assert delta <= 1e-12
        learned = NetPolicy(QModel(table, grid42), params.lambda_coef).tabular()
        oracle = extract_policy(grid42, solve_soft_bellman(SoftMdp(grid42), lam=1.0))
        for s in range(grid42.num_states):
            if oracle.rows[s] is not None:
                np.testing.assert_allclose(learned.rows[s], oracle.rows[s], atol=1e-9)


class TestRollout:
    def test_full_exploration_is_uniform(self, diamond, rng):
        mdp = SoftMdp(diamond)
        model = QModel(TabularQ(diamond.num_states, diamond.num_actions), diamond)
        model.net.table[0, 0] = 50.0  # would be greedy without exploration
        trajectories = rollout(mdp, model, 100_000, 1.0, rng, 1.0)
        first = np.array([t.actions[0] for t in trajectories])
        counts = np.bincount(first, minlength=2)
        assert stats.chisquare(counts).pvalue > 1e-4

    def test_zero_net_is_uniform(self, diamond, rng):
        mdp = SoftMdp(diamond)
        model = QModel(TabularQ(diamond.num_states, diamond.num_actions), diamond)
        trajectories = rollout(mdp, model, 50_000, 0.0, rng, 1.0)
        first = np.array([t.actions[0] for t in trajectories])
        counts = np.bincount(first, minlength=2)
        assert stats.chisquare(counts).pvalue > 1e-4

    def test_exact_q_samples_target_distribution(self, grid42, rng):
        model, _, mdp = exact_tabular_model(grid42)
        trajectories = rollout(mdp, model, 50_000, 0.0, rng, 1.0)
        counts = {}
        for t in trajectories:
            counts[t.terminal] = counts.get(t.terminal, 0) + 1
        empirical = {x: c / len(trajectories) for x, c in counts.items()}
        _, target = exact_partition(grid42)
        assert total_variation(empirical, target) <= 0.02

    def test_trajectories_are_complete(self, grid42, rng):
        model = QModel(TabularQ(grid42.num_states, grid42.num_actions), grid42)
        mdp = SoftMdp(grid42)
        for t in rollout(mdp, model, 64, 0.5, rng, 1.0):
            assert t.states[0] == grid42.initial_state
            assert grid42.is_terminal(t.terminal)
            for s, a, nxt in zip(t.states[:-1], t.actions, t.states[1:]):
                assert grid42.child(s, a) == nxt

    def test_transitions_skip_sink_and_carry_done_zero(self, grid42, rng):
        model = QModel(TabularQ(grid42.num_states, grid42.num_actions), grid42)
        trajectories = rollout(SoftMdp(grid42), model, 8, 0.0, rng, 1.0)
        for tr in transitions_from(trajectories):
            assert tr.done == 0 and tr.gfn_reward == 0.0
            assert not grid42.is_terminal(tr.state)


class TestEquivalences:
    def test_flow_form_residual_identity(self, grid42, rng):
        """The TD residual equals the log-ratio of edge flow to backward
        probability times child flow, under Q = log edge-flow."""
        env = grid42
        mdp = SoftMdp(env, lambda_coef=1.0)
        adj = adjacency(env)
        for _ in range(100):
            online = TabularQ(env.num_states, env.num_actions)
            target = TabularQ(env.num_states, env.num_actions)
            online.table[:] = rng.normal(size=online.table.shape)
            target.table[:] = rng.normal(size=target.table.shape)
            edges = rng.integers(0, len(adj.edge_src), size=32)
            s, a, nxt = adj.edge_src[edges], adj.edge_action[edges], adj.edge_dst[edges]
            batch = [
                Transition(int(si), int(ai), int(ni), 0.0, 0)
                for si, ai, ni in zip(s, a, nxt)
            ]
            y = td_targets(batch, QModel(target, env), mdp)
            residual_td = online.table[s, a] - y
            # independent route, in flow space
            edge_flow_online = np.exp(online.table[s, a])
            pb = 1.0 / env.num_parents_batch(nxt)
            child_flow = np.zeros(len(edges))
            for i, child in enumerate(nxt):
                child = int(child)
                if env.is_terminal(child):
                    child_flow[i] = env.reward(child)
                else:
                    acts = adj.actions[child]
                    child_flow[i] = np.exp(target.table[child, acts]).sum()
            residual_flow = np.log(edge_flow_online / (pb * child_flow))
            np.testing.assert_allclose(residual_td, residual_flow, atol=1e-10)

    def test_dueling_residual_equals_detailed_balance_residual(self, grid42, rng):
        """With a dueling head at temperature 1, the TD residual coincides
        with the detailed-balance residual built from the streams."""
        from softflow.nets import Mlp, masked_softmax

        env = grid42
        mdp = SoftMdp(env, lambda_coef=1.0)
        adj = adjacency(env)
        feats = env.encoding_matrix()
        mask_table = env.action_mask_table()
        for trial in range(50):
            online = Mlp(env.encoding_dim, env.num_actions, (16,), seed=trial, dueling=True)
            target = Mlp(env.encoding_dim, env.num_actions, (16,), seed=1000 + trial, dueling=True)
            edges = rng.integers(0, len(adj.edge_src), size=16)
            s, a, nxt = adj.edge_src[edges], adj.edge_action[edges], adj.edge_dst[edges]
            batch = [
                Transition(int(si), int(ai), int(ni), 0.0, 0)
                for si, ai, ni in zip(s, a, nxt)
            ]
            y = td_targets(batch, QModel(target, env), mdp)
            q_online = QModel(online, env).q_values(s, mask_table[s])
            residual_td = q_online[np.arange(len(edges)), a] - y

            # detailed-balance route via the two streams
            log_flow_s = online.value_stream(feats[s])
            adv = online.advantage_stream(feats[s])
            with np.errstate(divide="ignore"):
                log_pf = np.log(masked_softmax(adv, mask_table[s], 1.0))[
                    np.arange(len(edges)), a
                ]
            log_pb = -np.log(env.num_parents_batch(nxt).astype(float))
            log_flow_next = np.zeros(len(edges))
            for i, child in enumerate(nxt):
                child = int(child)
                if env.is_terminal(child):
                    log_flow_next[i] = env.log_reward(child)
                else:
                    log_flow_next[i] = target.value_stream(feats[[child]])[0]
            residual_db = log_flow_s + log_pf - log_flow_next - log_pb
            np.testing.assert_allclose(residual_td, residual_db, atol=1e-10)


class TestSamplers:
    def test_fit_is_deterministic(self, grid42):
        runs = [
            MunchausenDqnSampler(budget=2000, eval_every=500, seed=3).fit(HyperGrid(4, 2))
            for _ in range(2)
        ]
        a, b = runs
        assert np.array_equal(a.qnet_.theta, b.qnet_.theta)
        assert [(r.trajectories, r.l1, r.tv_exact, r.loss) for r in a.metrics_.rows] == [
            (r.trajectories, r.l1, r.tv_exact, r.loss) for r in b.metrics_.rows
        ]

    def test_policy_rows_from_exact_table_match_oracle(self, grid42):
        model, table, mdp = exact_tabular_model(grid42)
        oracle_policy = extract_policy(grid42, table)
        learned = NetPolicy(model, 1.0).tabular()
        for s in range(grid42.num_states):
            if oracle_policy.rows[s] is not None:
                np.testing.assert_allclose(
                    learned.rows[s], oracle_policy.rows[s], atol=1e-9
                )

    def test_predict_proba_rows_normalized(self, grid42):
        sampler = SoftDqnSampler(budget=500, eval_every=500, seed=0).fit(grid42)
        probs = sampler.predict_proba(np.arange(grid42.grid_size))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-10)

    def test_munchausen_temperature_follows_alpha(self):
        assert MunchausenDqnSampler().lambda_coef == pytest.approx(1 / 0.85)
        assert SoftDqnSampler().lambda_coef == 1.0

    def test_simple_variant_runs_without_buffer(self, grid42):
        sampler = SoftDqnSampler(
            budget=1000, eval_every=500, use_replay=False, loss="mse", seed=1
        ).fit(grid42)
        assert sampler.buffer_ is None
        assert sampler.metrics_.rows[-1].loss is not None

    def test_bitseq_run_records_modes(self):
        env = BitSequence(6, 3, random_modes(6, 2, 5), reward_exponent=2.0)
        sampler = MunchausenDqnSampler(
            budget=1500,
            eval_every=500,
            epsilon=1e-3,
            per_alpha=0.9,
            per_beta=0.1,
            hard_updates=True,
            target_update_period=5,
            terminal_loss_weight=2.0,
            seed=0,
        ).fit(env)
        rows = sampler.metrics_.rows
        assert rows[-1].modes is not None
        assert all(
            a.modes <= b.modes for a, b in zip(rows, rows[1:])
        )  # mode discovery is monotone

    def test_exact_distribution_improves_over_training(self, grid82):
        short = MunchausenDqnSampler(budget=1000, eval_every=500, seed=0).fit(grid82)
        longer = MunchausenDqnSampler(budget=8000, eval_every=1000, seed=0).fit(grid82)
        assert (
            longer.metrics_.rows[-1].tv_exact < short.metrics_.rows[-1].tv_exact
        )

    def test_sample_returns_terminal_states(self, grid42):
        sampler = SoftDqnSampler(budget=500, eval_every=500, seed=0).fit(grid42)
        samples = sampler.sample(64)
        assert all(grid42.is_terminal(int(x)) for x in samples)

    def test_sklearn_params_roundtrip(self):
        from sklearn.base import clone

        sampler = MunchausenDqnSampler(budget=123, lr=3e-4, seed=9)
        params = sampler.get_params()
        assert params["budget"] == 123 and params["lr"] == 3e-4
        twin = clone(sampler)
        assert twin.get_params() == params

    def test_target_update_schedule_hard_period(self, grid42):
        sampler = MunchausenDqnSampler(
            budget=320, batch_trajectories=16, hard_updates=True, target_update_period=5,
            eval_every=320, seed=0,
        )
        sampler.fit(grid42)
        assert sampler.n_iterations_ == 20
