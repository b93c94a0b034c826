"""Deception measurements over episode traces.

Victim-side quantities: whether the victim holds a false belief, what it
expects to earn under its belief, and how far its realized reward falls
short of that (the regret estimator).  ``reward_summaries`` aggregates
traces for the harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import BeliefVector, History, PolicyDistribution

KL_EPSILON = 1e-3


def _mass_of(belief, true_type):
    if isinstance(belief, BeliefVector):
        return belief.support, belief.mass
    if isinstance(belief, Mapping):
        return tuple(belief.keys()), tuple(belief.values())
    raise TypeError("belief must be a BeliefVector or a mapping")


def false_belief_indicator(belief, true_type) -> bool:
    """True iff some other type is at least as probable as the true one."""
    support, mass = _mass_of(belief, true_type)
    if true_type not in support:
        raise ValueError("the true type is not in the belief support")
    p_true = mass[support.index(true_type)]
    return any(m >= p_true for s, m in zip(support, mass) if s != true_type)


PolicyArg = Union[PolicyDistribution, Callable[..., PolicyDistribution]]


def expected_reward_per_type(own_policy: PolicyArg, simulated_opponent_policy: PolicyArg,
                             utility: Callable[[Any, Any], float],
                             history: Optional[History] = None) -> float:
    """Exact nested expectation E_opp[E_own[u(own, opp)]].

    ``simulated_opponent_policy`` may be a callable of the history.  When the
    victim moves after seeing the opponent (the IUG receiver) ``own_policy``
    may be a callable of the opponent action; otherwise it is a fixed
    distribution and the two moves are independent.
    """
    opp = simulated_opponent_policy(history) if callable(simulated_opponent_policy) else simulated_opponent_policy
    terms = []
    for o, po in zip(opp.actions, opp.probs):
        if po == 0.0:
            continue
        own = own_policy(o) if callable(own_policy) else own_policy
        for a, pa in zip(own.actions, own.probs):
            if pa != 0.0:
                terms.append(po * pa * utility(a, o))
    return math.fsum(terms)


def expected_reward(beliefs, per_type_expected: Mapping) -> float:
    """Belief-weighted mean of the per-type expected rewards."""
    support, mass = _mass_of(beliefs, None)
    if set(support) != set(per_type_expected.keys()):
        raise ValueError("belief support and per-type values differ")
    return math.fsum(m * per_type_expected[s] for s, m in zip(support, mass))


def regret_estimate(observed_reward: float, expected: float) -> float:
    """r^t - E(r^t); negative means the victim got less than it expected."""
    return observed_reward - expected


def cumulative_regret(observed: Sequence[float], expected: Sequence[float]) -> float:
    if len(observed) != len(expected):
        raise ValueError("observed and expected series differ in length")
    return math.fsum(regret_estimate(o, e) for o, e in zip(observed, expected))


def empirical_policy(actions: Sequence, action_space: Sequence) -> PolicyDistribution:
    if not actions:
        raise ValueError("no actions observed")
    counts = [0] * len(action_space)
    pos = {a: i for i, a in enumerate(action_space)}
    for a in actions:
        counts[pos[a]] += 1
    n = len(actions)
    return PolicyDistribution(tuple(action_space), tuple(c / n for c in counts))


def smooth(probs: Sequence[float], eps: float = KL_EPSILON) -> tuple:
    total = math.fsum(probs) + eps * len(probs)
    return tuple((p + eps) / total for p in probs)


def kl_expected_vs_observed(expected_policy: PolicyDistribution, empirical: PolicyDistribution,
                            eps: float = KL_EPSILON) -> float:
    """KL(empirical || expected) with the empirical side smoothed by eps.

    A deceived victim's assumed policy keeps a large divergence from the
    observed action frequencies.  Infinite if the model rules out an action
    that the smoothed empirical distribution (always) allows.
    """
    if tuple(expected_policy.actions) != tuple(empirical.actions):
        raise ValueError("policies are over different action sets")
    p = smooth(empirical.probs, eps)
    total = 0.0
    for pi, qi in zip(p, expected_policy.probs):
        if qi == 0.0:
            return math.inf
        total += pi * math.log(pi / qi)
    return max(total, 0.0)


# ---------------------------------------------------------------------------
# traces

@dataclass(frozen=True)
class TrialStep:
    trial: int
    belief: tuple               # victim posterior after the trial
    flags: tuple                # deceiver-side or victim-side aleph flags (1 = affirmed)
    triggered: bool
    expected_reward: float      # victim's belief-expected reward before the trial
    expected_opponent_reward: float


@dataclass(frozen=True)
class EpisodeTrace:
    game: str
    seed: int
    delta: float
    omega: float
    history: History
    steps: tuple
    type_labels: tuple
    flag_labels: tuple
    true_type: Any
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.steps) != len(self.history):
            raise ValueError("one step per trial")

    @property
    def rewards_a(self) -> tuple:
        return tuple(r.reward_a for r in self.history)

    @property
    def rewards_b(self) -> tuple:
        return tuple(r.reward_b for r in self.history)

    def cumulative(self, agent: str) -> float:
        return math.fsum(self.rewards_a if agent == "a" else self.rewards_b)

    @property
    def trigger_trial(self) -> Optional[int]:
        for s in self.steps:
            if s.triggered:
                return s.trial
        return None

    def victim_rewards(self) -> tuple:
        return self.rewards_b

    def regrets(self) -> tuple:
        return tuple(regret_estimate(r, s.expected_reward) for r, s in zip(self.victim_rewards(), self.steps))

    def false_beliefs(self) -> tuple:
        return tuple(false_belief_indicator(dict(zip(self.type_labels, s.belief)), self.true_type)
                     for s in self.steps)


def _stats(values) -> dict:
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "sd": sd, "n": int(arr.size)}


def reward_summaries(traces: Sequence[EpisodeTrace]) -> dict:
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to summarize")
    cum_a = [t.cumulative("a") for t in traces]
    cum_b = [t.cumulative("b") for t in traces]
    per_trial_a = [math.fsum(t.rewards_a) / len(t.history) for t in traces]
    per_trial_b = [math.fsum(t.rewards_b) / len(t.history) for t in traces]
    absdiff = [math.fsum(abs(a - b) for a, b in zip(t.rewards_a, t.rewards_b)) / len(t.history)
               for t in traces]
    trig = [t.trigger_trial for t in traces]
    fired = [x for x in trig if x is not None]
    total_b = math.fsum(cum_b)
    return {
        "episodes": len(traces),
        "reward_a_per_trial": _stats(per_trial_a),
        "reward_b_per_trial": _stats(per_trial_b),
        "cumulative_a": _stats(cum_a),
        "cumulative_b": _stats(cum_b),
        "ratio_a_to_b": math.fsum(cum_a) / total_b if total_b != 0 else math.inf,
        "abs_difference_per_trial": _stats(absdiff),
        "trigger_rate": len(fired) / len(traces),
        "trigger_trial": _stats(fired) if fired else {"mean": math.nan, "sd": math.nan, "n": 0},
    }
