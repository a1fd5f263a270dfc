import numpy as np
import pytest

from softflow import BitSequence, SoftMdp, solve_soft_bellman, extract_policy
from softflow.metrics import (
    ModeTracker,
    RunMetrics,
    SampleWindow,
    l1_distance,
    mc_prob_estimate,
    read_metrics_csv,
    spearman,
    total_variation,
)
from softflow.oracle import TabularPolicy, random_tabular_policy, terminal_distribution


class TestSampleWindow:
    def test_counts_track_fill(self):
        window = SampleWindow(5)
        window.add([1, 1, 2])
        assert len(window) == 3
        assert window.counts() == {1: 2, 2: 1}

    def test_ring_drops_oldest(self):
        window = SampleWindow(3)
        window.add([1, 2, 3, 4])
        assert len(window) == 3
        assert window.counts() == {2: 1, 3: 1, 4: 1}
        assert window.frequency(1) == 0.0


class TestL1:
    def test_point_mass_window_on_uniform_target(self):
        # all mass on one of K equally likely terminals: 2(K-1)/K^2
        k = 4
        target = {x: 1.0 / k for x in range(k)}
        window = SampleWindow(100)
        window.add([0] * 50)
        expected = 2 * (k - 1) / k**2
        assert l1_distance(window, target) == pytest.approx(expected)

    def test_matching_point_masses(self):
        window = SampleWindow(10)
        window.add([7, 7, 7])
        assert l1_distance(window, {7: 1.0}) == 0.0

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError):
            l1_distance(SampleWindow(4), {0: 1.0})

    def test_symmetric_in_the_two_distributions(self):
        # swapping which side is "empirical" leaves the value unchanged
        target = {0: 0.25, 1: 0.75}
        window = SampleWindow(4)
        window.add([0, 0, 0, 1])
        forward = l1_distance(window, target)
        swapped_target = {0: 0.75, 1: 0.25}
        swapped_window = SampleWindow(4)
        swapped_window.add([0, 1, 1, 1])
        assert forward == pytest.approx(l1_distance(swapped_window, swapped_target))

    def test_window_keys_outside_target_still_count(self):
        window = SampleWindow(4)
        window.add([5, 5])
        assert l1_distance(window, {0: 1.0}) == pytest.approx((1.0 + 1.0) / 1)

    def test_bounded_by_two_over_support(self, rng):
        target = {x: p for x, p in enumerate(rng.dirichlet(np.ones(16)))}
        window = SampleWindow(64)
        window.add(rng.integers(0, 16, size=64))
        assert l1_distance(window, target) * len(target) <= 2.0

    def test_window_sampled_from_target_is_small(self, rng):
        target_probs = rng.dirichlet(np.ones(8))
        target = {x: p for x, p in enumerate(target_probs)}
        window = SampleWindow(200_000)
        window.add(rng.choice(8, size=200_000, p=target_probs))
        assert l1_distance(window, target) <= 4 * np.sqrt(8 / 200_000) / 8 * 8


class TestTotalVariation:
    def test_disjoint_masses(self):
        assert total_variation({0: 1.0}, {1: 1.0}) == pytest.approx(1.0)

    def test_identical(self):
        p = {0: 0.3, 1: 0.7}
        assert total_variation(p, dict(p)) == 0.0


class TestMcEstimate:
    def test_chain_is_exact_for_any_sample_count(self, chain, rng):
        policy = TabularPolicy(rows=[np.array([1.0]), None])
        for n in (1, 10):
            assert mc_prob_estimate(chain, policy, 1, n, rng) == pytest.approx(1.0)

    def test_unbiased_on_diamond(self, diamond, rng):
        # deterministic forward policy: P(x) = 1; the backward walk halves
        policy = TabularPolicy(
            rows=[np.array([1.0, 0.0]), np.array([1.0]), np.array([1.0]), None]
        )
        estimates = [mc_prob_estimate(diamond, policy, 3, 20, rng) for _ in range(500)]
        assert np.mean(estimates) == pytest.approx(1.0, abs=0.05)

    def test_matches_exact_probability_on_tiny_bitseq(self, bitseq_tiny, rng):
        policy = random_tabular_policy(bitseq_tiny, rng)
        dist = terminal_distribution(bitseq_tiny, policy)
        x = next(iter(bitseq_tiny.terminal_states()))
        estimates = [
            mc_prob_estimate(bitseq_tiny, policy, x, 10, rng) for _ in range(3000)
        ]
        sem = np.std(estimates) / np.sqrt(len(estimates))
        assert abs(np.mean(estimates) - dist[x]) <= 4 * sem + 1e-12

    def test_rejects_non_terminal(self, diamond, rng):
        policy = TabularPolicy(rows=[np.array([1.0, 0.0]), None, None, None])
        with pytest.raises(ValueError):
            mc_prob_estimate(diamond, policy, 0, 10, rng)

    def test_batched_estimator_agrees_with_scalar_and_dp(self, bitseq_tiny, rng):
        from softflow.metrics import mc_prob_estimates

        policy = random_tabular_policy(bitseq_tiny, rng)
        dist = terminal_distribution(bitseq_tiny, policy)
        x = list(bitseq_tiny.terminal_states())[3]
        batched = mc_prob_estimates(bitseq_tiny, policy, x, 4000, 10, rng)
        scalar = [mc_prob_estimate(bitseq_tiny, policy, x, 10, rng) for _ in range(500)]
        sem_b = np.std(batched) / np.sqrt(len(batched))
        sem_s = np.std(scalar) / np.sqrt(len(scalar))
        assert abs(np.mean(batched) - dist[x]) <= 4 * sem_b + 1e-12
        assert abs(np.mean(scalar) - dist[x]) <= 4 * sem_s + 1e-12

    def test_single_sample_and_ten_sample_variance_ratio(self, bitseq_tiny, rng):
        from softflow.metrics import mc_prob_estimates

        policy = random_tabular_policy(bitseq_tiny, rng)
        x = list(bitseq_tiny.terminal_states())[5]
        one = mc_prob_estimates(bitseq_tiny, policy, x, 20_000, 1, rng)
        ten = mc_prob_estimates(bitseq_tiny, policy, x, 20_000, 10, rng)
        ratio = np.var(one) / np.var(ten)
        assert 7.0 <= ratio <= 13.0  # averaging ten halves nothing but variance


class TestModeTracker:
    def test_counting(self):
        env = BitSequence(4, 2, ["0000", "1111"])
        tracker = ModeTracker(env, delta=1)
        assert tracker.count == 0
        tracker.update([env.string_id("0000")])
        assert tracker.count == 1
        tracker.update([env.string_id("1110")])  # within distance 1 of 1111
        assert tracker.count == 2

    def test_monotone(self, rng):
        env = BitSequence(4, 2, ["0000", "1111"])
        tracker = ModeTracker(env, delta=0)
        seen = []
        terminals = list(env.terminal_states())
        for _ in range(30):
            tracker.update(rng.choice(terminals, size=2))
            seen.append(tracker.count)
        assert all(a <= b for a, b in zip(seen, seen[1:]))

    def test_default_radius_is_quarter_length(self):
        env = BitSequence(12, 3, ["0" * 12])
        assert ModeTracker(env).delta == 3


class TestSpearman:
    def test_identical_rankings(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_value(self):
        assert spearman([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)

    def test_degenerate_reported_as_nan(self):
        assert np.isnan(spearman([1, 1, 1], [1, 2, 3]))

    def test_rank_correlation_of_target_vs_reward(self, bitseq_tiny):
        # the target distribution and rewards tie in exactly the same groups
        from softflow import exact_partition

        _, target = exact_partition(bitseq_tiny)
        xs = list(target)
        rewards = [bitseq_tiny.reward(x) for x in xs]
        assert spearman(rewards, [target[x] for x in xs]) == pytest.approx(1.0)

    def test_rank_correlation_of_policy_vs_reward(self, bitseq_tiny):
        # DP probabilities of the exact sampler rank-align up to tie noise
        policy = extract_policy(bitseq_tiny, solve_soft_bellman(SoftMdp(bitseq_tiny)))
        dist = terminal_distribution(bitseq_tiny, policy)
        xs = list(dist)
        rewards = [bitseq_tiny.reward(x) for x in xs]
        assert spearman(rewards, [dist[x] for x in xs]) >= 0.97


class TestRunMetrics:
    def test_rows_strictly_increasing(self):
        metrics = RunMetrics(seed=0)
        metrics.add(100, 0.5, 0.4, 1.0, None, 0.0)
        with pytest.raises(ValueError):
            metrics.add(100, 0.4, 0.3, 0.9, None, 0.0)

    def test_csv_roundtrip(self, tmp_path):
        metrics = RunMetrics(seed=7)
        metrics.add(2000, 0.125, 0.25, 1.5, None, 0.0)
        metrics.add(4000, 0.0625, None, 0.75, 3, 0.0)
        path = tmp_path / "metrics.csv"
        metrics.write_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "trajectories,l1,tv_exact,loss,modes,seconds,seed"
        rows = read_metrics_csv(path)
        assert rows[0]["trajectories"] == 2000
        assert rows[0]["l1"] == 0.125
        assert rows[1]["tv_exact"] is None
        assert rows[1]["modes"] == 3
        assert rows[1]["seed"] == 7

    def test_summary_final_row(self):
        metrics = RunMetrics(seed=1)
        metrics.add(10, 0.9, None, None, None, 0.0)
        summary = metrics.summary()
        assert summary["evaluations"] == 1
        assert summary["final"]["trajectories"] == 10
