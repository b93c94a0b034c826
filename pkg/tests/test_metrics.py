import math

import pytest
from hypothesis import given, strategies as st

import oracles
from aleph_ipomdp import game_iug as g
from aleph_ipomdp import harness, metrics
from aleph_ipomdp.core import OFFERS, BeliefVector, EngineConfig, PolicyDistribution, Response

ACCEPT = PolicyDistribution((Response(True), Response(False)), (1.0, 0.0))
REJECT = PolicyDistribution((Response(True), Response(False)), (0.0, 1.0))


def receiver_utility(resp, offer):
    return g.iug_reward(offer, resp)[1]


def test_false_belief_examples():
    b = {"random": 0.95, "psi_0.1": 0.03, "psi_0.5": 0.02}
    assert metrics.false_belief_indicator(b, "psi_0.1")
    assert not metrics.false_belief_indicator(b, "random")
    assert not metrics.false_belief_indicator(BeliefVector(("a", "b"), (1.0, 0.0)), "a")
    assert metrics.false_belief_indicator({"a": 0.5, "b": 0.5}, "a")
    with pytest.raises(ValueError):
        metrics.false_belief_indicator({"a": 1.0}, "z")


def test_expected_reward_per_type_examples():
    uniform = PolicyDistribution(OFFERS, (1 / 11,) * 11)
    assert metrics.expected_reward_per_type(ACCEPT, uniform, receiver_utility) == pytest.approx(0.5)
    assert metrics.expected_reward_per_type(REJECT, uniform, receiver_utility) == 0.0
    thr = g.dom_m1_sender_policy(g.ThresholdSender(0.1), g.SenderBounds(), 0.1)
    v = metrics.expected_reward_per_type(lambda o: ACCEPT, lambda h: thr, receiver_utility)
    assert v == pytest.approx(oracles.ACCEPT_ALL_VS_PSI01, abs=1e-12)


def test_expected_reward_mixing():
    assert metrics.expected_reward({"a": 1.0, "b": 0.0}, {"a": 0.7, "b": 0.1}) == 0.7
    assert metrics.expected_reward({"a": 0.5, "b": 0.5}, {"a": 0.2, "b": 0.4}) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        metrics.expected_reward({"a": 1.0}, {"b": 0.2})


@given(st.floats(0, 1), st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(0.01, 1), min_size=3, max_size=3), st.lists(st.floats(0.01, 1), min_size=3, max_size=3))
def test_expected_reward_is_linear(lam, vals, w1, w2):
    support = ("x", "y", "z")
    b1 = BeliefVector.from_weights(support, w1)
    b2 = BeliefVector.from_weights(support, w2)
    mix = BeliefVector(support, tuple(lam * p + (1 - lam) * q for p, q in zip(b1.mass, b2.mass)))
    per = dict(zip(support, vals))
    lhs = metrics.expected_reward(mix, per)
    rhs = lam * metrics.expected_reward(b1, per) + (1 - lam) * metrics.expected_reward(b2, per)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_regret():
    assert metrics.regret_estimate(0.4, 0.4) == 0.0
    assert metrics.regret_estimate(0.1, 0.4) == pytest.approx(-0.3)
    assert metrics.cumulative_regret([0.1, 0.2], [0.2, 0.2]) == pytest.approx(-0.1)
    with pytest.raises(ValueError):
        metrics.cumulative_regret([0.1], [])


def test_kl_examples():
    acts = tuple(range(11))
    u = PolicyDistribution(acts, (1 / 11,) * 11)
    point = metrics.empirical_policy([0] * 12, acts)
    assert metrics.kl_expected_vs_observed(u, point) == pytest.approx(oracles.KL_POINT_VS_UNIFORM11, rel=1e-12)
    even = metrics.empirical_policy(list(acts), acts)
    assert metrics.kl_expected_vs_observed(u, even) == pytest.approx(0.0, abs=1e-15)
    certain = PolicyDistribution(acts, (1.0,) + (0.0,) * 10)
    assert metrics.kl_expected_vs_observed(certain, point) == math.inf
    with pytest.raises(ValueError):
        metrics.empirical_policy([], acts)


dists = st.lists(st.floats(0.001, 1.0), min_size=4, max_size=4)


@given(dists, st.lists(st.integers(0, 3), min_size=1, max_size=30))
def test_kl_nonnegative(q, obs):
    acts = (0, 1, 2, 3)
    qd = PolicyDistribution(acts, tuple(x / sum(q) for x in q))
    kl = metrics.kl_expected_vs_observed(qd, metrics.empirical_policy(obs, acts))
    assert kl >= 0.0
    same = PolicyDistribution(acts, metrics.smooth(metrics.empirical_policy(obs, acts).probs))
    assert metrics.kl_expected_vs_observed(same, metrics.empirical_policy(obs, acts)) == pytest.approx(0, abs=1e-12)


def test_zero_sum_regret_is_minus_deceiver_advantage():
    cell = harness.Cell(game="rowcol", deceiver_dom=1, victim_dom=0, matrix=1)
    tr = harness.run_episode(cell, 3)
    regret = metrics.cumulative_regret(tr.victim_rewards(), [s.expected_reward for s in tr.steps])
    advantage = tr.cumulative("a") - math.fsum(s.expected_opponent_reward for s in tr.steps)
    assert regret == pytest.approx(-advantage, abs=1e-12)
    assert regret < 0


def test_reward_summaries():
    with pytest.raises(ValueError):
        metrics.reward_summaries([])
    cell = harness.Cell(game="iug", deceiver_dom=-1, threshold="random",
                        config=EngineConfig(horizon=4))
    traces = [harness.run_episode(cell, s) for s in range(3)]
    s = metrics.reward_summaries(traces)
    assert s["episodes"] == 3 and s["reward_b_per_trial"]["n"] == 3
    assert s["trigger_rate"] == 0.0 and s["trigger_trial"]["n"] == 0
    tot_a = sum(t.cumulative("a") for t in traces)
    tot_b = sum(t.cumulative("b") for t in traces)
    assert s["ratio_a_to_b"] == pytest.approx(tot_a / tot_b)
