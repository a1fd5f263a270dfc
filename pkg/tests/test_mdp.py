import numpy as np
import pytest

from softflow import ExplicitGraph, HyperGrid, SoftMdp, UniformBackward
from softflow.graphs import InvalidStateError
from softflow.oracle import TrajectorySet


def test_uniform_backward_examples(diamond, grid42):
    pb = UniformBackward()
    # single parent
    assert pb.prob(diamond, 0, 1) == pytest.approx(1.0)
    # two parents share the mass
    env = HyperGrid(8, 2)
    s11 = env.state_id((1, 1))
    assert pb.prob(env, env.state_id((0, 1)), s11) == pytest.approx(0.5)
    # terminating edge: the copy has a single parent
    copy = env.state_id((3, 3), terminal=True)
    assert pb.prob(env, env.state_id((3, 3)), copy) == pytest.approx(1.0)


def test_uniform_backward_rejects_non_edges(diamond):
    pb = UniformBackward()
    with pytest.raises(InvalidStateError):
        pb.prob(diamond, 0, 3)


@pytest.mark.parametrize(
    "env_builder",
    [lambda: HyperGrid(4, 2), lambda: HyperGrid(2, 3)],
)
def test_backward_normalization_exact(env_builder):
    env = env_builder()
    pb = UniformBackward()
    for s in range(env.num_states):
        if s == env.initial_state:
            continue
        parents = np.array(env.parents(s))
        total = pb.prob_batch(env, parents, np.full(len(parents), s)).sum()
        assert abs(total - 1.0) <= 1e-15


def test_mdp_reward_cases(diamond, chain):
    mdp = SoftMdp(diamond)
    # interior edge into a two-parent state
    assert mdp.reward(1, 3) == pytest.approx(np.log(0.5))
    # terminal to sink pays the log reward
    chain_mdp = SoftMdp(chain)
    assert chain_mdp.reward(1, chain_mdp.sink) == pytest.approx(np.log(2.0))
    # sink self-loop is free
    assert mdp.reward(mdp.sink, mdp.sink) == 0.0


def test_mdp_reward_rejects_non_edges(diamond):
    mdp = SoftMdp(diamond)
    with pytest.raises(InvalidStateError):
        mdp.reward(0, 3)
    with pytest.raises(InvalidStateError):
        mdp.reward(0, mdp.sink)
    with pytest.raises(InvalidStateError):
        mdp.reward(3, 0)
    with pytest.raises(InvalidStateError):
        mdp.reward(mdp.sink, 0)


def test_terminal_branch_matches_log_reward_bitwise(grid42):
    mdp = SoftMdp(grid42)
    for x in grid42.terminal_states():
        assert mdp.reward(x, mdp.sink) == grid42.log_reward(x)


def test_lambda_must_be_positive(diamond):
    with pytest.raises(ValueError):
        SoftMdp(diamond, lambda_coef=0.0)


@pytest.mark.parametrize(
    "env_builder",
    [
        lambda: ExplicitGraph({0: [1, 2], 1: [3], 2: [3]}, {3: 1.0}),
        lambda: HyperGrid(3, 2),
    ],
)
def test_trajectory_reward_telescopes_to_balance_numerator(env_builder):
    """Summing edge rewards along a full trajectory (plus the sink step)
    reproduces log of R(x) times the backward path probability."""
    env = env_builder()
    mdp = SoftMdp(env)
    ts = TrajectorySet(env)
    for trajectory in ts.trajectories:
        total = sum(
            mdp.reward(s, s_next)
            for s, s_next in zip(trajectory.states[:-1], trajectory.states[1:])
        )
        total += mdp.reward(trajectory.terminal, mdp.sink)
        expected = env.log_reward(trajectory.terminal) + sum(
            mdp.backward.log_prob(env, s, s_next)
            for s, s_next in zip(trajectory.states[:-1], trajectory.states[1:])
        )
        assert total == pytest.approx(expected, abs=1e-12)


def test_rewards_finite_everywhere(grid42):
    mdp = SoftMdp(grid42)
    for s in range(grid42.num_states):
        if grid42.is_terminal(s):
            assert np.isfinite(mdp.reward(s, mdp.sink))
        else:
            for _, child in grid42.children(s):
                assert np.isfinite(mdp.reward(s, child))
