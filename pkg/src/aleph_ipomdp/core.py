"""Shared vocabulary: actions, histories, agent specs, beliefs, policies,
seeded randomness and engine configuration."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from typing import Any, Hashable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

NORM_TOL = 1e-9
LIKELIHOOD_FLOOR = 1e-300


class ConfigError(ValueError):
    """Raised for inconsistent configuration, before any trial runs."""


class ImpossibleObservation(ValueError):
    """Raised when every hypothesis assigns zero likelihood to an observation."""


class RewardMaskedError(RuntimeError):
    """Raised when a hidden reward is read before it is revealed."""


# ---------------------------------------------------------------------------
# actions

@dataclass(frozen=True, order=True)
class Offer:
    index: int

    def __post_init__(self):
        if not (isinstance(self.index, (int, np.integer)) and 0 <= self.index <= 10):
            raise ValueError(f"offer index must be an integer in [0, 10], got {self.index!r}")

    @property
    def value(self) -> float:
        return self.index / 10.0

    @property
    def code(self) -> str:
        return chr(self.index + 0x30)

    def __str__(self) -> str:
        return f"{self.index / 10:.1f}"


@dataclass(frozen=True)
class Response:
    accept: bool

    @property
    def code(self) -> str:
        return "A" if self.accept else "R"

    def __str__(self) -> str:
        return "accept" if self.accept else "reject"


ROW_CHOICES = ("T", "B")
COLUMN_CHOICES = ("L", "M", "R")


@dataclass(frozen=True)
class Row:
    choice: str

    def __post_init__(self):
        if self.choice not in ROW_CHOICES:
            raise ValueError(f"row must be one of {ROW_CHOICES}, got {self.choice!r}")

    @property
    def index(self) -> int:
        return ROW_CHOICES.index(self.choice)

    @property
    def code(self) -> str:
        return self.choice

    def __str__(self) -> str:
        return self.choice


@dataclass(frozen=True)
class Column:
    choice: str

    def __post_init__(self):
        if self.choice not in COLUMN_CHOICES:
            raise ValueError(f"column must be one of {COLUMN_CHOICES}, got {self.choice!r}")

    @property
    def index(self) -> int:
        return COLUMN_CHOICES.index(self.choice)

    @property
    def code(self) -> str:
        return self.choice

    def __str__(self) -> str:
        return self.choice


GameAction = Union[Offer, Response, Row, Column]

OFFERS = tuple(Offer(i) for i in range(11))
RESPONSES = (Response(True), Response(False))
ROWS = tuple(Row(c) for c in ROW_CHOICES)
COLUMNS = tuple(Column(c) for c in COLUMN_CHOICES)


# ---------------------------------------------------------------------------
# histories

@dataclass(frozen=True)
class TrialRecord:
    """One trial: agent a acts first in the log (sender / row), agent b second."""

    trial: int
    action_a: GameAction
    action_b: GameAction
    reward_a: Optional[float] = None
    reward_b: Optional[float] = None
    reward_visible: bool = True

    def __post_init__(self):
        if self.trial < 1:
            raise ValueError("trial indices start at 1")
        if type(self.action_a) is type(self.action_b):
            raise ValueError("action_a and action_b must be different action variants")

    def masked(self) -> "TrialRecord":
        """Copy with hidden rewards stripped, as an agent would observe it."""
        if self.reward_visible:
            return self
        return replace(self, reward_a=None, reward_b=None)


@dataclass(frozen=True)
class History:
    records: tuple = ()
    horizon: Optional[int] = None

    def __post_init__(self):
        for i, rec in enumerate(self.records):
            if rec.trial != i + 1:
                raise ValueError("trial indices must be contiguous from 1")
        if self.horizon is not None and len(self.records) > self.horizon:
            raise ValueError("history longer than horizon")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def next_trial(self) -> int:
        return len(self.records) + 1

    def append(self, action_a: GameAction, action_b: GameAction, reward_a=None, reward_b=None,
               reward_visible: bool = True) -> "History":
        rec = TrialRecord(len(self.records) + 1, action_a, action_b, reward_a, reward_b, reward_visible)
        return History(self.records + (rec,), self.horizon)

    def actions_a(self) -> tuple:
        return tuple(r.action_a for r in self.records)

    def actions_b(self) -> tuple:
        return tuple(r.action_b for r in self.records)

    def observable(self) -> "History":
        """The agent-facing view: rewards of unrevealed trials are removed."""
        return History(tuple(r.masked() for r in self.records), self.horizon)

    def cumulative_reward(self, agent: str) -> float:
        total = 0.0
        for r in self.records:
            if not r.reward_visible:
                raise RewardMaskedError(f"reward of trial {r.trial} is not visible yet")
            total += r.reward_a if agent == "a" else r.reward_b
        return total


# ---------------------------------------------------------------------------
# agents

@dataclass(frozen=True)
class RandomSender:
    label: str = "random"


@dataclass(frozen=True)
class ThresholdSender:
    psi: float

    @property
    def label(self) -> str:
        return f"threshold_{self.psi:g}"


@dataclass(frozen=True)
class InformedRow:
    matrix_id: int

    @property
    def label(self) -> str:
        return f"informed_{self.matrix_id}"


@dataclass(frozen=True)
class UninformedRow:
    label: str = "uninformed"


@dataclass(frozen=True)
class Planner:
    label: str = "planner"


Persona = Union[RandomSender, ThresholdSender, InformedRow, UninformedRow, Planner]
_SCRIPTED = (RandomSender, ThresholdSender, InformedRow, UninformedRow)


@dataclass(frozen=True)
class AgentSpec:
    dom_level: int
    role: str
    persona: Persona = Planner()
    psi: Optional[float] = None  # utility threshold of a planning sender

    def __post_init__(self):
        if self.dom_level not in (-1, 0, 1, 2):
            raise ConfigError(f"unsupported DoM level {self.dom_level}")
        if self.role not in ("sender", "receiver", "row", "column"):
            raise ConfigError(f"unknown role {self.role!r}")
        if self.dom_level == -1 and not isinstance(self.persona, _SCRIPTED):
            raise ConfigError("DoM(-1) agents need a scripted persona")
        if self.dom_level >= 0 and not isinstance(self.persona, Planner):
            raise ConfigError("DoM(k>=0) agents are planners")


# ---------------------------------------------------------------------------
# distributions

def _check_mass(mass: Sequence[float], what: str):
    if len(mass) == 0:
        raise ValueError(f"{what} is empty")
    for m in mass:
        if not (m >= 0.0):  # also rejects NaN
            raise ValueError(f"{what} has a negative or NaN entry: {m}")
    total = math.fsum(mass)
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"{what} sums to {total!r}, not 1")


@dataclass(frozen=True)
class BeliefVector:
    support: tuple
    mass: tuple

    def __post_init__(self):
        if len(self.support) != len(self.mass):
            raise ValueError("support and mass differ in length")
        _check_mass(self.mass, "belief")

    @classmethod
    def uniform(cls, support: Sequence[Hashable]) -> "BeliefVector":
        n = len(support)
        return cls(tuple(support), tuple([1.0 / n] * n))

    @classmethod
    def from_weights(cls, support: Sequence[Hashable], weights: Sequence[float]) -> "BeliefVector":
        total = math.fsum(weights)
        return cls(tuple(support), tuple(w / total for w in weights))

    def prob(self, key: Hashable) -> float:
        return self.mass[self.support.index(key)]

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.mass))

    def argmax(self) -> Hashable:
        best = max(range(len(self.mass)), key=lambda i: (self.mass[i], -i))
        return self.support[best]


@dataclass(frozen=True)
class PolicyDistribution:
    actions: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.actions) != len(self.probs):
            raise ValueError("actions and probs differ in length")
        _check_mass(self.probs, "policy")

    def prob(self, action: GameAction) -> float:
        try:
            return self.probs[self.actions.index(action)]
        except ValueError:
            return 0.0

    def mode(self) -> GameAction:
        """Most likely action, lowest index on ties."""
        best = max(range(len(self.probs)), key=lambda i: (self.probs[i], -i))
        return self.actions[best]

    def sample(self, rng: "RandomSource") -> GameAction:
        return self.actions[rng.categorical(self.probs)]

    def as_dict(self) -> dict:
        return dict(zip(self.actions, self.probs))


def softmax_weights(values: Sequence[float], temperature: float) -> list:
    """Max-subtracted softmax over a plain sequence; the hot-loop variant."""
    top = max(values)
    w = [math.exp((v - top) / temperature) for v in values]
    s = math.fsum(w)
    return [x / s for x in w]


def softmax_policy(qvalues: Mapping[Any, float], temperature: float) -> PolicyDistribution:
    if not qvalues:
        raise ValueError("no legal actions")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    actions = tuple(qvalues.keys())
    vals = [float(qvalues[a]) for a in actions]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("q-values must be finite")
    return PolicyDistribution(actions, tuple(softmax_weights(vals, temperature)))


def posterior_mass(prior: Sequence[float], likelihoods: Sequence[float]) -> tuple:
    """Bayes rule on bare tuples; raises ImpossibleObservation on zero total mass."""
    un = [p * max(l, LIKELIHOOD_FLOOR) for p, l in zip(prior, likelihoods)]
    total = math.fsum(un)
    if not total > 0.0:
        raise ImpossibleObservation("impossible observation")
    return tuple(u / total for u in un)


def bayes_update(prior: BeliefVector, likelihoods: Mapping[Hashable, float]) -> BeliefVector:
    if set(likelihoods.keys()) != set(prior.support):
        raise ValueError("likelihood keys must match the belief support")
    lik = []
    for key in prior.support:
        l = float(likelihoods[key])
        if l < 0 or math.isnan(l):
            raise ValueError("likelihoods must be non-negative")
        lik.append(l)
    return BeliefVector(prior.support, posterior_mass(prior.mass, lik))


def discounted_return(rewards: Iterable[float], gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("discount must lie in [0, 1]")
    total, w = 0.0, 1.0
    for r in rewards:
        total += w * r
        w *= gamma
    return total


# ---------------------------------------------------------------------------
# randomness

def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=4).digest(), "little")


class RandomSource:
    """Seeded stream that can be split into independent labelled sub-streams.

    ``child(label)`` depends only on the seed and the label path, never on how
    many numbers the parent has drawn, so adding a consumer in one component
    leaves every other component's draws untouched.
    """

    def __init__(self, seed: int, path: tuple = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.path = tuple(path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(_label_key(p) for p in self.path))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, label: str) -> "RandomSource":
        return RandomSource(self.seed, self.path + (str(label),))

    def uniform(self, size=None):
        return self.generator.random(size)

    def categorical(self, probs: Sequence[float]) -> int:
        u = self.generator.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        # rounding left u above the running sum; take the last positive entry
        for i in range(len(probs) - 1, -1, -1):
            if probs[i] > 0:
                return i
        raise ValueError("empty distribution")

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, path={self.path})"


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class EngineConfig:
    horizon: int = 12
    temperature: float = 0.1
    gamma: float = 0.99
    delta: float = 0.1
    omega: float = 0.3
    mechanism_samples: int = 200
    planner_iterations: int = 3000
    aleph_enabled: bool = False
    c_uct: Optional[float] = None          # None: 2 x reward range of the game
    delta_mode: str = "auto"               # auto | constant | schedule
    gzip_warmup: int = 3
    z2_two_sided: bool = True
    z2_own_action: str = "policy"          # policy | actual
    row_prior: str = "split"               # split (1/2, 1/4, 1/4) | flat
    rowcol_planner: str = "expectimax"     # expectimax | ipomcp

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.horizon < 1:
            raise ConfigError("horizon T must be >= 1")
        if not self.temperature > 0:
            raise ConfigError("softmax temperature must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("discount must be in [0, 1]")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if not 0.0 <= self.omega < 0.5:
            raise ConfigError("omega must be in [0, 0.5)")
        if self.aleph_enabled and self.mechanism_samples < 1:
            raise ConfigError("the aleph-mechanism needs at least one sample")
        if self.planner_iterations < 0:
            raise ConfigError("planner iterations must be >= 0")
        if self.delta_mode not in ("auto", "constant", "schedule"):
            raise ConfigError(f"unknown delta mode {self.delta_mode!r}")
        if self.z2_own_action not in ("policy", "actual"):
            raise ConfigError(f"unknown z2 own-action mode {self.z2_own_action!r}")
        if self.row_prior not in ("split", "flat"):
            raise ConfigError(f"unknown row prior {self.row_prior!r}")
        if self.rowcol_planner not in ("expectimax", "ipomcp"):
            raise ConfigError(f"unknown row/column planner {self.rowcol_planner!r}")

    def with_(self, **kw) -> "EngineConfig":
        return replace(self, **kw)
