import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfaits import _kernels
from bfaits.errors import UninformedArm
from bfaits.experiments import build
from bfaits.posterior import PosteriorState, estimate_p
from bfaits.rates import optimal_beta
from bfaits.sampler import (
    SamplerConfig,
    adapt_beta,
    phi_estimate,
    recommend,
    select_arm,
    selection_probabilities,
)


def frozen(mean, var, count=1):
    s = PosteriorState(np.asarray(var, dtype=float) * count)
    s.count[:] = count
    s.post_mean[:] = mean
    s.sum[:] = np.asarray(mean) * count
    return s


def play_freq(state, beta, gamma, n, seed):
    hist, leader = _kernels.play_counts(state.post_mean, state.post_sd(), np.asarray(gamma, float), beta, 100, n,
                                        np.random.default_rng(seed))
    return hist / n, leader / n


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(beta=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(beta=1.5)
    assert SamplerConfig(beta=1.0).beta == 1.0


def test_beta_one_plays_clear_leader():
    s = frozen([[2.0, -3.0], [0.0, -3.0]], np.full((2, 2), 1e-6), count=10**6)
    freq, _ = play_freq(s, 1.0, [0.0], 10_000, 0)
    assert freq[0] >= 0.999


def test_leader_share_follows_coin():
    s = frozen(np.zeros((4, 2)), np.ones((4, 2)))
    rng = np.random.default_rng(1)
    traces = [select_arm(s, SamplerConfig(beta=0.5), [0.0], rng) for _ in range(2000)]
    for t in traces:
        assert (t.played == t.leader) == t.coin
        assert t.attempts <= 100
    _, leader = play_freq(s, 0.5, [0.0], 100_000, 2)
    assert 0.497 <= leader <= 0.503


def test_degenerate_exp5_state():
    inst = build("exp5").instance
    s = frozen(inst.mu, inst.sigma2 / 10**6, count=10**6)
    freq, _ = play_freq(s, 0.5, inst.gamma, 100_000, 3)
    assert abs(freq[9] - 0.5) <= 0.01


def test_select_arm_needs_informed_state():
    s = PosteriorState(np.ones((2, 1)))
    s.update(0, [0.0])
    with pytest.raises(UninformedArm):
        select_arm(s, SamplerConfig(), [], np.random.default_rng(0))


def test_recommend_examples():
    for exp_id, arm in (("exp1", 25), ("dose", 1), ("exp5", 9)):
        inst = build(exp_id).instance
        assert recommend(frozen(inst.mu, inst.sigma2), inst.gamma) == arm
    s = frozen([[0.0, 1.0], [0.0, 2.0], [5.0, 0.5]], np.ones((3, 2)))
    assert recommend(s, [0.0]) == 2


def test_selection_probability_limits():
    assert selection_probabilities([1.0, 0.0, 0.0], 0.0, 0.3)[0] == pytest.approx(0.3)
    assert selection_probabilities([0.5, 0.5], 0.0, 0.5).tolist() == [0.5, 0.5]
    # with an always-empty feasible set every arm is played uniformly
    np.testing.assert_allclose(selection_probabilities([0.0, 0.0, 0.0], 1.0, 0.4), 1 / 3)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_selection_probabilities_form_a_distribution(seed, beta):
    rng = np.random.default_rng(seed)
    raw = rng.dirichlet(np.ones(int(rng.integers(3, 8))))
    p, c = raw[:-1], raw[-1]
    phi = selection_probabilities(p, c, beta)
    assert np.all(phi >= 0) and phi.sum() == pytest.approx(1.0, abs=1e-12)
    # without empty draws the law reduces to the two-term closed form
    p0 = raw / raw.sum()
    odds = p0 / (1 - p0)
    expected = beta * p0 + (1 - beta) * p0 * (odds.sum() - odds)
    np.testing.assert_allclose(selection_probabilities(p0, 0.0, beta), expected, rtol=1e-12)


def test_phi_estimate_symmetric_two_arms():
    s = frozen([[0.0, -10.0], [0.0, -10.0]], np.ones((2, 2)))
    phi, emp = phi_estimate(s, SamplerConfig(beta=0.5), [0.0], 20_000, 0)
    np.testing.assert_allclose(phi, 0.5, atol=1e-12)
    np.testing.assert_allclose(emp, 0.5, atol=0.015)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 0.9))
def test_phi_matches_play_frequencies(seed, beta):
    rng = np.random.default_rng(seed)
    k, m = int(rng.integers(2, 6)), int(rng.integers(0, 3))
    s = frozen(rng.normal(0, 0.5, (k, m + 1)), rng.uniform(0.05, 0.5, (k, m + 1)))
    gamma = np.zeros(m)
    draws = 40_000
    p, c = estimate_p(s, gamma, 400_000, rng)
    phi = selection_probabilities(p, c, beta)
    freq, _ = play_freq(s, beta, gamma, draws, seed)
    se = np.sqrt(phi * (1 - phi) / draws) + 1e-3
    assert np.all(np.abs(freq - phi) <= 3 * se + 0.002)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_played_arm_in_range_and_differs_without_coin(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 8))
    s = frozen(rng.normal(size=(k, 2)), rng.uniform(0.01, 1.0, (k, 2)))
    for _ in range(50):
        t = select_arm(s, SamplerConfig(beta=0.3), [0.0], rng)
        assert 0 <= t.played < k
        if not t.coin:
            assert t.played != t.leader and t.challenger == t.played


def test_adapt_beta_stationary_at_optimum():
    inst = build("exp5").instance
    beta_star, _ = optimal_beta(inst)
    s = frozen(inst.mu, inst.sigma2)
    assert abs(adapt_beta(s, beta_star, inst.gamma) - beta_star) <= 0.02 + 1e-12


def test_adapt_beta_steps_up_and_clamps():
    inst = build("exp5").instance
    s = frozen(inst.mu, inst.sigma2)
    assert adapt_beta(s, 0.05, inst.gamma) == pytest.approx(0.07)
    assert adapt_beta(s, 0.01, inst.gamma) >= 0.05
    assert adapt_beta(s, 0.99, inst.gamma) == pytest.approx(0.95)
