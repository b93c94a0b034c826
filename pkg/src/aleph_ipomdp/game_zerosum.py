"""Iterated Bayesian row/column zero-sum game.

Nature picks one of two payoff matrices; the row player may know which.
Payoffs are hidden until the episode ends, so the column player can only
learn from the row player's moves.  Rows and columns are handled as indices
(T=0, B=1; L=0, M=1, R=2) internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

from . import aleph
from .core import (COLUMNS, ROWS, BeliefVector, Column, EngineConfig, PolicyDistribution,
                   RandomSource, Row, posterior_mass, softmax_weights)
from .planning import expectimax, ipomcp


@dataclass(frozen=True)
class PayoffMatrix:
    id: int
    entries: tuple

    def __post_init__(self):
        if len(self.entries) != 2 or any(len(r) != 3 for r in self.entries):
            raise ValueError("payoff matrices are 2 x 3")


G1 = PayoffMatrix(1, ((4.0, 0.0, 2.0), (4.0, 0.0, -2.0)))
G2 = PayoffMatrix(2, ((0.0, 4.0, -2.0), (0.0, 4.0, 2.0)))
MATRICES = {1: G1, 2: G2}
# what an uninformed row player's payoffs look like to someone who cannot tell G1 from G2
G_MEAN = tuple(tuple((a + b) / 2 for a, b in zip(r1, r2)) for r1, r2 in zip(G1.entries, G2.entries))

ROW_TYPES = (0, 1, 2)
ROW_TYPE_LABELS = ("uninformed", "informed_1", "informed_2")
ROW_MODEL_LABELS = ("dom1_matrix_1", "dom1_matrix_2", "uninformed")


def _ri(row) -> int:
    return row.index if isinstance(row, Row) else int(row)


def _ci(col) -> int:
    return col.index if isinstance(col, Column) else int(col)


def payoff(matrix: PayoffMatrix, row, column) -> tuple:
    g = matrix.entries[_ri(row)][_ci(column)]
    return g, -g


def row_prior(config: EngineConfig) -> tuple:
    if config.row_prior == "flat":
        return (1 / 3, 1 / 3, 1 / 3)
    return (0.5, 0.25, 0.25)


def _entries_for_type(theta: int) -> tuple:
    return G_MEAN if theta == 0 else MATRICES[theta].entries


def dom_m1_row_q(theta: int) -> tuple:
    """Q of a DoM(-1) row player, who assumes a uniform column player."""
    e = _entries_for_type(theta)
    return tuple(sum(r) / 3.0 for r in e)


def dom_m1_row_probs(theta: int, temperature: float) -> tuple:
    if theta == 0:
        return (0.5, 0.5)
    return tuple(softmax_weights(dom_m1_row_q(theta), temperature))


def dom_m1_row_policy(theta: int, temperature: float = 0.1) -> PolicyDistribution:
    if theta not in ROW_TYPES:
        raise ValueError("row type must be 0, 1 or 2")
    return PolicyDistribution(ROWS, dom_m1_row_probs(theta, temperature))


# ---------------------------------------------------------------------------
# DoM(0) column

def dom0_row_likelihoods(row, temperature: float) -> tuple:
    r = _ri(row)
    return tuple(dom_m1_row_probs(th, temperature)[r] for th in ROW_TYPES)


def dom0_column_update(belief: BeliefVector, row, temperature: float = 0.1) -> BeliefVector:
    return BeliefVector(belief.support, posterior_mass(belief.mass, dom0_row_likelihoods(row, temperature)))


def dom0_column_q(belief: Sequence[float], temperature: float) -> tuple:
    mass = belief.mass if isinstance(belief, BeliefVector) else belief
    q = [0.0, 0.0, 0.0]
    for th, b in zip(ROW_TYPES, mass):
        if b == 0.0:
            continue
        e = _entries_for_type(th)
        pr = dom_m1_row_probs(th, temperature)
        for c in range(3):
            q[c] -= b * (pr[0] * e[0][c] + pr[1] * e[1][c])
    return tuple(q)


def dom0_column_probs(belief: Sequence[float], temperature: float) -> tuple:
    return tuple(softmax_weights(dom0_column_q(belief, temperature), temperature))


def dom0_column_policy(belief, temperature: float = 0.1) -> PolicyDistribution:
    return PolicyDistribution(COLUMNS, dom0_column_probs(belief, temperature))


def dom0_column_act(belief, temperature: float, rng: RandomSource) -> Column:
    return dom0_column_policy(belief, temperature).sample(rng)


# ---------------------------------------------------------------------------
# DoM(1) row

class RowSimulator:
    """Planning interface of the informed DoM(1) row player.

    State: (t, number of T played so far, nested DoM(0) belief).  The nested
    belief depends on the history only through the counts because DoM(-1)
    likelihoods are stationary, which is what makes ``key`` a valid
    transposition key.  The column moves simultaneously, so its policy does
    not depend on the row's current move.
    """

    def __init__(self, matrix: PayoffMatrix, config: EngineConfig):
        self.entries = matrix.entries
        self.horizon = config.horizon
        self.temperature = config.temperature
        self._lik = (dom0_row_likelihoods(0, self.temperature), dom0_row_likelihoods(1, self.temperature))

    def actions(self, state):
        return (0, 1)

    def opponent_policy(self, state, row):
        return tuple(enumerate(dom0_column_probs(state[2], self.temperature)))

    def reward(self, state, row, col):
        return self.entries[row][col]

    def transition(self, state, row, col):
        t, n_top, belief = state
        return (t + 1, n_top + (row == 0), posterior_mass(belief, self._lik[row]))

    def is_terminal(self, state):
        return state[0] > self.horizon

    def key(self, state):
        return state[0], state[1]


def dom1_row_q(t: int, n_top: int, nested_belief: Sequence[float], matrix: PayoffMatrix,
               config: EngineConfig, rng: Optional[RandomSource] = None) -> Dict[int, float]:
    """Full-horizon Q-values of the DoM(1) row player at trial t."""
    sim = RowSimulator(matrix, config)
    state = (t, n_top, tuple(nested_belief))
    if config.rowcol_planner == "ipomcp":
        c = config.c_uct if config.c_uct is not None else 16.0
        return ipomcp(state, max(config.planner_iterations, 1), c, config.gamma, sim, rng)
    return expectimax(state, config.horizon - t, sim, config.gamma, memo={})


def dom1_row_probs(t: int, n_top: int, nested_belief, matrix: PayoffMatrix, config: EngineConfig,
                   rng: Optional[RandomSource] = None) -> tuple:
    q = dom1_row_q(t, n_top, nested_belief, matrix, config, rng)
    return tuple(softmax_weights([q[0], q[1]], config.temperature))


def dom1_row_act(t: int, n_top: int, nested_belief, matrix: PayoffMatrix, config: EngineConfig,
                 rng: RandomSource) -> Row:
    probs = dom1_row_probs(t, n_top, nested_belief, matrix, config, rng.child("search"))
    return PolicyDistribution(ROWS, probs).sample(rng)


class ScriptedRow:
    """DoM(-1) row player of type theta (0 uninformed, 1/2 informed)."""

    def __init__(self, theta: int, config: EngineConfig):
        self.theta = theta
        self.policy = dom_m1_row_policy(theta, config.temperature)
        self.flags = None

    def act(self, rng: RandomSource) -> Row:
        return self.policy.sample(rng)

    def observe(self, record):
        pass


class Dom1Row:
    """Informed DoM(1) row player, optionally aleph-augmented.

    Its aleph-mechanism compares the column player's moves with what its
    nested DoM(0) model predicted, trial by trial (delta-typicality).  Rewards
    stay hidden, so the reward check never fires before the end.
    """

    def __init__(self, matrix: PayoffMatrix, config: EngineConfig):
        self.matrix = matrix
        self.config = config
        self.nested = row_prior(config)
        self.t = 1
        self.n_top = 0
        self.aleph = config.aleph_enabled
        self.flags = aleph.AlephFlags.initial(1)
        self.predicted = []   # nested DoM(0) column distribution at each past trial
        self.seen = []        # observed column indices

    @property
    def triggered(self) -> bool:
        return self.aleph and self.flags.triggered

    def policy(self, rng: Optional[RandomSource] = None) -> PolicyDistribution:
        if self.triggered:
            return aleph.minmax_policy(self.matrix)
        return PolicyDistribution(ROWS, dom1_row_probs(self.t, self.n_top, self.nested, self.matrix,
                                                       self.config, rng))

    def act(self, rng: RandomSource) -> Row:
        return self.policy(rng.child("search")).sample(rng)

    def delta(self) -> float:
        if self.config.delta_mode == "constant":
            return self.config.delta
        return aleph.delta_schedule(self.t, self.config.horizon)

    def observe(self, record):
        row, col = record.action_a, record.action_b
        temp = self.config.temperature
        self.predicted.append(dom0_column_probs(self.nested, temp))
        self.seen.append(_ci(col))
        if self.aleph and not self.flags.triggered:
            z1 = aleph.z1_delta(self.seen, [self.predicted], self.delta())
            z2 = aleph.z2_reward(0.0, [()], self.config.omega, masked=True)
            self.flags = aleph.combine(self.flags, z1, z2)
        r = _ri(row)
        self.nested = posterior_mass(self.nested, dom0_row_likelihoods(r, temp))
        self.n_top += r == 0
        self.t += 1


class Dom0Column:
    def __init__(self, config: EngineConfig):
        self.config = config
        self.belief = row_prior(config)
        self.labels = ROW_TYPE_LABELS

    def policy(self) -> PolicyDistribution:
        return dom0_column_policy(self.belief, self.config.temperature)

    def act(self, rng: RandomSource) -> Column:
        return self.policy().sample(rng)

    def observe(self, record):
        self.belief = posterior_mass(self.belief, dom0_row_likelihoods(record.action_a, self.config.temperature))

    def expected_rewards(self) -> tuple:
        """Per row type: the column's expected reward this trial."""
        pc = dom0_column_probs(self.belief, self.config.temperature)
        out = []
        for th in ROW_TYPES:
            e = _entries_for_type(th)
            pr = dom_m1_row_probs(th, self.config.temperature)
            out.append(-math.fsum(pc[c] * pr[r] * e[r][c] for r in range(2) for c in range(3)))
        return tuple(out)


class Dom2Column:
    """Counter-deceptive column: models the row as DoM(1) (either matrix) or
    as an uninformed DoM(-1), and best-responds myopically."""

    def __init__(self, config: EngineConfig):
        self.config = config
        p = row_prior(config)
        self.belief = (p[1], p[2], p[0])
        self.labels = ROW_MODEL_LABELS
        self.t = 1
        self.n_top = 0
        self.nested = row_prior(config)   # the DoM(1)'s nested DoM(0) belief
        self._cache: Dict[tuple, tuple] = {}

    def row_model(self, h: int) -> tuple:
        """Row distribution predicted by hypothesis h at the current trial."""
        if h == 2:
            return (0.5, 0.5)
        key = (h, self.t, self.n_top)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = dom1_row_probs(self.t, self.n_top, self.nested, MATRICES[h + 1],
                                                    self.config.with_(rowcol_planner="expectimax"))
        return hit

    def q(self) -> tuple:
        q = [0.0, 0.0, 0.0]
        for h, b in enumerate(self.belief):
            if b == 0.0:
                continue
            e = G_MEAN if h == 2 else MATRICES[h + 1].entries
            pr = self.row_model(h)
            for c in range(3):
                q[c] -= b * (pr[0] * e[0][c] + pr[1] * e[1][c])
        return tuple(q)

    def policy(self) -> PolicyDistribution:
        return PolicyDistribution(COLUMNS, tuple(softmax_weights(self.q(), self.config.temperature)))

    def act(self, rng: RandomSource) -> Column:
        return self.policy().sample(rng)

    def observe(self, record):
        r = _ri(record.action_a)
        lik = tuple(self.row_model(h)[r] for h in range(3))
        self.belief = posterior_mass(self.belief, lik)
        temp = self.config.temperature
        self.nested = posterior_mass(self.nested, dom0_row_likelihoods(r, temp))
        self.n_top += r == 0
        self.t += 1

    def expected_rewards(self) -> tuple:
        pc = tuple(softmax_weights(self.q(), self.config.temperature))
        out = []
        for h in range(3):
            e = G_MEAN if h == 2 else MATRICES[h + 1].entries
            pr = self.row_model(h)
            out.append(-math.fsum(pc[c] * pr[r] * e[r][c] for r in range(2) for c in range(3)))
        return tuple(out)
