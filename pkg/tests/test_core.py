import math

import pytest
from hypothesis import given, settings, strategies as st

from aleph_ipomdp.core import (COLUMNS, OFFERS, ROWS, AgentSpec, BeliefVector, Column, ConfigError,
                               EngineConfig, History, ImpossibleObservation, InformedRow, Offer,
                               Planner, PolicyDistribution, RandomSender, RandomSource, Response,
                               RewardMaskedError, Row, ThresholdSender, TrialRecord, UninformedRow,
                               bayes_update, discounted_return, posterior_mass, softmax_policy)

finite_q = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def test_offer_range_and_codes():
    assert [o.code for o in OFFERS][:3] == ["0", "1", "2"]
    assert Offer(10).code == ":"
    assert Offer(3).value == pytest.approx(0.3)
    with pytest.raises(ValueError):
        Offer(11)
    with pytest.raises(ValueError):
        Offer(-1)
    assert Response(True).code == "A" and Response(False).code == "R"
    assert [r.code for r in ROWS] == ["T", "B"]
    assert [c.code for c in COLUMNS] == ["L", "M", "R"]
    with pytest.raises(ValueError):
        Row("X")


def test_trial_record_rejects_mixed_variants():
    with pytest.raises(ValueError):
        TrialRecord(1, Row("T"), Row("B"))
    with pytest.raises(ValueError):
        TrialRecord(0, Offer(1), Response(True))


def test_history_contiguity_and_horizon():
    h = History(horizon=2).append(Offer(1), Response(True), 0.9, 0.1)
    h = h.append(Offer(2), Response(False), 0.0, 0.0)
    assert [r.trial for r in h] == [1, 2]
    with pytest.raises(ValueError):
        h.append(Offer(2), Response(False))
    with pytest.raises(ValueError):
        History((TrialRecord(2, Offer(1), Response(True)),))


def test_masked_history_hides_rewards():
    h = History().append(Row("T"), Column("L"), 4.0, -4.0, reward_visible=False)
    obs = h.observable()
    assert obs[0].reward_a is None and obs[0].reward_b is None
    with pytest.raises(RewardMaskedError):
        h.cumulative_reward("a")
    v = History().append(Row("T"), Column("L"), 4.0, -4.0)
    assert v.cumulative_reward("b") == -4.0


def test_agent_spec_validation():
    AgentSpec(-1, "sender", ThresholdSender(0.1))
    AgentSpec(-1, "row", InformedRow(1))
    AgentSpec(1, "sender", Planner())
    with pytest.raises(ValueError):
        AgentSpec(0, "receiver", RandomSender())
    with pytest.raises(ValueError):
        AgentSpec(-1, "row", Planner())
    with pytest.raises(ValueError):
        AgentSpec(3, "row", Planner())
    AgentSpec(-1, "row", UninformedRow())


def test_softmax_examples():
    p = softmax_policy({"T": 2.0, "B": 2.0 / 3.0}, 0.1)
    assert p.prob("T") == pytest.approx(1.0 / (1.0 + math.exp(-40.0 / 3.0)), abs=1e-12)
    assert p.prob("T") == pytest.approx(0.9999984, abs=1e-7)
    u = softmax_policy({"x": 5.0, "y": 5.0, "z": 5.0}, 0.7)
    assert u.probs == pytest.approx((1 / 3, 1 / 3, 1 / 3))


def test_softmax_errors():
    with pytest.raises(ValueError, match="no legal actions"):
        softmax_policy({}, 0.1)
    with pytest.raises(ValueError):
        softmax_policy({"a": math.inf}, 0.1)
    with pytest.raises(ValueError):
        softmax_policy({"a": math.nan, "b": 1.0}, 0.1)
    with pytest.raises(ValueError):
        softmax_policy({"a": 1.0}, 0.0)


@given(st.lists(finite_q, min_size=1, max_size=11), finite_q,
       st.floats(min_value=0.01, max_value=10.0))
def test_softmax_shift_invariance_and_argmax(qs, shift, temp):
    q = {i: v for i, v in enumerate(qs)}
    p = softmax_policy(q, temp)
    p2 = softmax_policy({k: v + shift for k, v in q.items()}, temp)
    assert sum(p.probs) == pytest.approx(1.0, abs=1e-9)
    assert all(x >= 0 for x in p.probs)
    for a, b in zip(p.probs, p2.probs):
        assert a == pytest.approx(b, abs=1e-9)
    # argmax agrees up to gaps too small to separate the probabilities
    best = max(q.values())
    assert q[p.mode()] >= best - 1e-9 * max(1.0, temp)
    assert p.mode() == min(k for k in q if p.prob(k) == max(p.probs))


def test_policy_and_belief_validation():
    with pytest.raises(ValueError):
        PolicyDistribution(("a", "b"), (0.5, 0.6))
    with pytest.raises(ValueError):
        PolicyDistribution(("a", "b"), (1.5, -0.5))
    with pytest.raises(ValueError):
        BeliefVector(("a",), (0.9,))
    with pytest.raises(ValueError):
        BeliefVector((), ())


def test_bayes_update_examples():
    prior = BeliefVector.uniform(("random", "psi_0.1", "psi_0.5"))
    post = bayes_update(prior, {"random": 1 / 11, "psi_0.1": 3.3e-4, "psi_0.5": 8.2e-3})
    assert post.mass == pytest.approx((0.914, 0.003, 0.083), abs=1e-3)
    same = bayes_update(prior, {"random": 0.2, "psi_0.1": 0.2, "psi_0.5": 0.2})
    assert same.mass == pytest.approx(prior.mass)
    pm = BeliefVector(("a", "b", "c"), (1.0, 0.0, 0.0))
    assert bayes_update(pm, {"a": 0.1, "b": 0.7, "c": 0.9}).mass == (1.0, 0.0, 0.0)


def test_bayes_update_errors():
    prior = BeliefVector(("a", "b"), (1.0, 0.0))
    # zero likelihoods are floored at 1e-300, so the surviving type keeps the mass
    assert bayes_update(prior, {"a": 0.0, "b": 1.0}).mass == (1.0, 0.0)
    with pytest.raises(ImpossibleObservation, match="impossible observation"):
        posterior_mass((0.0, 0.0), (0.5, 0.5))
    with pytest.raises(ValueError):
        bayes_update(prior, {"a": 1.0})
    with pytest.raises(ValueError):
        bayes_update(prior, {"a": -0.1, "b": 1.0})


probs3 = st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=3, max_size=3)


@given(probs3, st.lists(probs3, min_size=1, max_size=6))
def test_bayes_sequential_equals_batch(prior_w, liks):
    support = ("a", "b", "c")
    prior = BeliefVector.from_weights(support, prior_w)
    seq = prior
    for lik in liks:
        seq = bayes_update(seq, dict(zip(support, lik)))
    prod = [1.0, 1.0, 1.0]
    for lik in liks:
        prod = [p * l for p, l in zip(prod, lik)]
    batch = bayes_update(prior, dict(zip(support, prod)))
    assert seq.mass == pytest.approx(batch.mass, abs=1e-9)
    assert sum(seq.mass) == pytest.approx(1.0, abs=1e-9)


def test_discounted_return():
    assert discounted_return([1, 1, 1], 0.0) == 1
    assert discounted_return([1, 1], 0.99) == pytest.approx(1.99)
    assert discounted_return([], 0.5) == 0
    with pytest.raises(ValueError):
        discounted_return([1], 1.5)


def test_random_source_children_are_stable():
    a = RandomSource(5)
    x = a.child("mechanism").uniform(4)
    a.uniform(100)                       # drawing from the parent must not shift children
    y = RandomSource(5).child("mechanism").uniform(4)
    assert list(x) == list(y)
    assert list(a.child("planner").uniform(4)) != list(x)
    with pytest.raises(ValueError):
        RandomSource(-1)


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=6))
def test_categorical_never_hits_zero_mass(w):
    if sum(w) == 0:
        return
    probs = [x / sum(w) for x in w]
    rs = RandomSource(1)
    for _ in range(50):
        assert probs[rs.categorical(probs)] > 0


def test_config_validation():
    EngineConfig()
    with pytest.raises(ConfigError):
        EngineConfig(horizon=0)
    with pytest.raises(ConfigError):
        EngineConfig(temperature=0.0)
    with pytest.raises(ConfigError):
        EngineConfig(gamma=1.5)
    with pytest.raises(ConfigError):
        EngineConfig(omega=0.5)
    with pytest.raises(ConfigError):
        EngineConfig(aleph_enabled=True, mechanism_samples=0)
    with pytest.raises(ConfigError):
        EngineConfig(delta_mode="sometimes")
    assert EngineConfig().with_(horizon=3).horizon == 3
