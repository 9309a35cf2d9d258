import numpy as np
import pytest

from pdpowers.core import PolicyTable, transition_prob
from pdpowers.environment import (BenchmarkParams, RngStream,
                                  build_benchmark_instance, rollout,
                                  sign_actions)

H, D = 10, 5
A_ALL_MINUS, A_ALL_PLUS = 0, 15


def test_sign_actions_lexicographic():
    acts = sign_actions(D)
    assert acts.shape == (16, 4)
    assert np.array_equal(acts[A_ALL_MINUS], [-1, -1, -1, -1])
    assert np.array_equal(acts[A_ALL_PLUS], [1, 1, 1, 1])
    assert np.array_equal(acts[1], [-1, -1, -1, 1])
    # strictly increasing when read as binary numbers
    codes = ((acts + 1) / 2) @ (2.0 ** np.arange(3, -1, -1))
    assert np.array_equal(codes, np.arange(16))


def test_benchmark_survival_probabilities(benchmark):
    # p_surv = 0.95 - 0.01 * sum(a); extremes are the all-sign actions.
    for s in range(H):
        for h in range(H):
            assert transition_prob(benchmark, h, s, A_ALL_PLUS, s + 1) == \
                pytest.approx(0.91, abs=1e-12)
            assert transition_prob(benchmark, h, s, A_ALL_PLUS, H + 1) == \
                pytest.approx(0.09, abs=1e-12)
            assert transition_prob(benchmark, h, s, A_ALL_MINUS, s + 1) == \
                pytest.approx(0.99, abs=1e-12)
    for s in (H, H + 1):
        assert transition_prob(benchmark, 0, s, 3, s) == pytest.approx(1.0, abs=1e-12)


def test_benchmark_parameter_norm(benchmark):
    norms = np.linalg.norm(benchmark.theta_star, axis=1)
    expected = 2.3 * np.sqrt(0.95**2 + 4 * 0.01**2)
    assert np.allclose(norms, expected, atol=1e-12)
    assert norms.max() <= benchmark.B


def test_benchmark_reward_schedule(benchmark):
    r1 = benchmark.reward_table(1)
    r10 = benchmark.reward_table(10)
    r19 = benchmark.reward_table(19)
    r20 = benchmark.reward_table(20)
    # blocks of 10 episodes, first block favors +1 actions
    assert np.array_equal(r1, benchmark.reward_table(9))
    assert np.array_equal(r10, r19)
    assert np.array_equal(r1, r20)
    assert not np.array_equal(r1, r10)
    # even block pays the +1 fraction, odd block the complement
    assert r1[0, 0, A_ALL_PLUS] == pytest.approx(0.4)
    assert r1[0, 0, A_ALL_MINUS] == pytest.approx(0.0)
    assert r10[0, 0, A_ALL_PLUS] == pytest.approx(0.0)
    assert r10[0, 0, A_ALL_MINUS] == pytest.approx(0.4)
    # terminal states: the good absorbing state pays 1, the other 0
    assert np.all(r1[:, H + 1, :] == 1.0)
    assert np.all(r1[:, H, :] == 0.0)


def test_benchmark_constraint_table(benchmark):
    g = benchmark.g_table
    assert g[0, 0, A_ALL_PLUS] == pytest.approx(1.0)
    assert g[0, 0, A_ALL_MINUS] == pytest.approx(0.0)
    assert np.all(g[:, H:, :] == 0.0)
    assert g.min() >= 0.0 and g.max() <= 1.0


def test_benchmark_params_validate():
    with pytest.raises(ValueError):
        BenchmarkParams(p0=0.99, slope=0.01).validate()  # hits 1.03
    with pytest.raises(ValueError):
        BenchmarkParams(dim=1).validate()
    BenchmarkParams().validate()


def test_custom_benchmark_dimensions():
    inst = build_benchmark_instance(BenchmarkParams(horizon=4, dim=3, b=2.5))
    assert inst.horizon == 4
    assert inst.num_states == 6
    assert inst.num_actions == 4


def test_rng_stream_reproducible():
    s1, s2 = RngStream(7), RngStream(7)
    a = s1.for_episode(3).random(5)
    b = s2.for_episode(3).random(5)
    assert np.array_equal(a, b)
    c = s1.for_episode(4).random(5)
    assert not np.array_equal(a, c)
    d = RngStream(8).for_episode(3).random(5)
    assert not np.array_equal(a, d)


def test_rollout_deterministic(tiny):
    pol = PolicyTable.uniform(tiny.horizon, tiny.num_states, tiny.num_actions)
    ep1 = rollout(tiny, pol, 5, RngStream(11))
    ep2 = rollout(tiny, pol, 5, RngStream(11))
    assert np.array_equal(ep1.states, ep2.states)
    assert np.array_equal(ep1.actions, ep2.actions)
    assert ep1.states[0] == tiny.s1
    assert np.all((ep1.states >= 0) & (ep1.states < tiny.num_states))


def test_rollout_follows_deterministic_policy(tiny):
    probs = np.zeros((tiny.horizon, tiny.num_states, tiny.num_actions))
    probs[:, :, 1] = 1.0
    ep = rollout(tiny, PolicyTable(probs), 1, RngStream(0))
    assert np.all(ep.actions == 1)


def test_rollout_transition_frequencies(benchmark):
    # all-plus actions survive step 1 with probability 0.91
    probs = np.zeros((H, benchmark.num_states, benchmark.num_actions))
    probs[:, :, A_ALL_PLUS] = 1.0
    pol = PolicyTable(probs)
    stream = RngStream(123)
    n = 4000
    survived = sum(rollout(benchmark, pol, k, stream).states[1] == 1
                   for k in range(1, n + 1))
    se = np.sqrt(0.91 * 0.09 / n)
    assert abs(survived / n - 0.91) < 4 * se


def test_tiny_transition_values(tiny):
    # q(s, a) = 0.3 + 0.25 a + 0.05 s
    for s in range(tiny.num_states):
        for a in range(tiny.num_actions):
            q = 0.3 + 0.25 * a + 0.05 * s
            assert transition_prob(tiny, 0, s, a, (s + 1) % 4) == \
                pytest.approx(q, abs=1e-15)
            assert transition_prob(tiny, 0, s, a, (s + 3) % 4) == \
                pytest.approx(1.0 - q, abs=1e-15)
