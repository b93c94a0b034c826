"""Iterated ultimatum game and its agent hierarchy.

Offers are integer indices 0..10 (value index/10) everywhere in this module;
the real value only appears inside utility formulas.

DoM(-1) senders are scripted (random or threshold), the DoM(0) receiver
infers the sender type by Bayesian IRL and plans by type-conditioned
Expectimax, and the DoM(1) sender plans with IPOMCP through an exact copy of
the receiver, including its aleph-mechanism when that is switched on.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import aleph
from .core import (OFFERS, EngineConfig, Offer, PolicyDistribution, RandomSender, RandomSource,
                   Response, ThresholdSender, posterior_mass, softmax_policy)
from .planning import expectimax, ipomcp

N_OFFERS = 11
OFFER_INDICES = tuple(range(N_OFFERS))
NO_OFFER = -1
TYPE_SET = (RandomSender(), ThresholdSender(0.1), ThresholdSender(0.5))
TYPE_LABELS = tuple(t.label for t in TYPE_SET)
OFFER_CODES = tuple(o.code for o in OFFERS)


def _index(offer) -> int:
    return offer.index if isinstance(offer, Offer) else int(offer)


def _accepted(response) -> bool:
    return response.accept if isinstance(response, Response) else bool(response)


def iug_reward(offer, response) -> tuple:
    """(sender reward, receiver reward)."""
    i = _index(offer)
    if _accepted(response):
        return (10 - i) / 10.0, i / 10.0
    return 0.0, 0.0


def threshold_utility(offer, response, psi: float) -> float:
    if not _accepted(response):
        return 0.0
    return 1.0 - _index(offer) / 10.0 - psi


# ---------------------------------------------------------------------------
# DoM(-1) senders

@dataclass(frozen=True)
class SenderBounds:
    """Bounds (L, U] on the offers a threshold sender still considers.

    ``lower_open`` is False until the first rejection: before any offer has
    been turned down the lower bound 0 is itself a viable offer.
    """

    lower: int = 0
    upper: int = 10
    lower_open: bool = False

    @property
    def L(self) -> float:
        return self.lower / 10.0

    @property
    def U(self) -> float:
        return self.upper / 10.0

    @property
    def inverted(self) -> bool:
        """L > U, which only a deceiver's history can produce."""
        return self.lower > self.upper


def update_bounds(bounds: SenderBounds, offer, response) -> SenderBounds:
    i = _index(offer)
    if _accepted(response):
        return SenderBounds(bounds.lower, i, bounds.lower_open)
    return SenderBounds(i, bounds.upper, True)


def fold_bounds(offers: Sequence, responses: Sequence) -> tuple:
    """Bounds and last offer after a whole history, computed from scratch."""
    b, last = SenderBounds(), NO_OFFER
    for o, r in zip(offers, responses):
        b = update_bounds(b, o, r)
        last = _index(o)
    return b, last


def threshold_cap(psi: float) -> int:
    """Largest offer index whose utility 1 - a - psi is still non-negative."""
    return int(math.floor((1.0 - psi) * 10 + 1e-9))


def viable_offers(bounds: SenderBounds, psi: float) -> range:
    lo = bounds.lower + 1 if bounds.lower_open else bounds.lower
    return range(lo, min(bounds.upper, threshold_cap(psi)) + 1)


@lru_cache(maxsize=None)
def offer_probs(psi: Optional[float], lower: int, upper: int, lower_open: bool, last: int,
                temperature: float) -> tuple:
    """Offer distribution of a DoM(-1) sender; ``psi=None`` is the random sender."""
    if psi is None:
        return (1.0 / N_OFFERS,) * N_OFFERS
    viable = viable_offers(SenderBounds(lower, upper, lower_open), psi)
    probs = [0.0] * N_OFFERS
    if len(viable) == 0:
        if last == NO_OFFER:
            raise ValueError("empty viable interval before any offer was made")
        probs[last] = 1.0
        return tuple(probs)
    utils = [(1.0 - i / 10.0 - psi) / temperature for i in viable]
    top = max(utils)
    w = [math.exp(u - top) for u in utils]
    s = math.fsum(w)
    for i, x in zip(viable, w):
        probs[i] = x / s
    return tuple(probs)


def _psi(persona) -> Optional[float]:
    if isinstance(persona, RandomSender):
        return None
    if isinstance(persona, ThresholdSender):
        return persona.psi
    raise TypeError(f"not a DoM(-1) sender persona: {persona!r}")


def dom_m1_sender_policy(persona, bounds: SenderBounds, temperature: float = 0.1,
                         last_offer: Optional[int] = None) -> PolicyDistribution:
    last = NO_OFFER if last_offer is None else _index(last_offer)
    probs = offer_probs(_psi(persona), bounds.lower, bounds.upper, bounds.lower_open, last, temperature)
    return PolicyDistribution(OFFERS, probs)


def dom0_likelihood(offer, persona, bounds: SenderBounds, last_offer: Optional[int] = None,
                    temperature: float = 0.1) -> float:
    last = NO_OFFER if last_offer is None else _index(last_offer)
    return offer_probs(_psi(persona), bounds.lower, bounds.upper, bounds.lower_open, last,
                       temperature)[_index(offer)]


class ScriptedSender:
    """A DoM(-1) sender: samples from its myopic policy, tracks its bounds."""

    def __init__(self, persona, config: EngineConfig):
        self.persona = persona
        self.temperature = config.temperature
        self.bounds = SenderBounds()
        self.last = NO_OFFER

    def policy(self) -> PolicyDistribution:
        return dom_m1_sender_policy(self.persona, self.bounds, self.temperature,
                                    None if self.last == NO_OFFER else self.last)

    def act(self, rng: RandomSource) -> Offer:
        return self.policy().sample(rng)

    def observe(self, record):
        self.bounds = update_bounds(self.bounds, record.action_a, record.action_b)
        self.last = record.action_a.index


# ---------------------------------------------------------------------------
# DoM(0) receiver: type-conditioned lookahead

class TypeConditionedReceiver:
    """The receiver's planning problem against one hypothesized sender type.

    State: (t, lower, upper, lower_open, last, offer) where ``offer`` is the
    offer on the table at trial t.  Own actions are accept (True) / reject.
    The sender's next offer plays the role of the opponent move.
    """

    def __init__(self, psi: Optional[float], horizon: int, temperature: float):
        self.psi = psi
        self.horizon = horizon
        self.temperature = temperature

    def actions(self, state):
        return (True, False)

    def opponent_policy(self, state, accept):
        t, lo, hi, op, _, offer = state
        if t >= self.horizon:
            return ((None, 1.0),)
        if accept:
            hi = offer
        else:
            lo, op = offer, True
        probs = offer_probs(self.psi, lo, hi, op, offer, self.temperature)
        return tuple((i, p) for i, p in enumerate(probs) if p > 0.0)

    def reward(self, state, accept, _next_offer):
        return state[5] / 10.0 if accept else 0.0

    def transition(self, state, accept, next_offer):
        t, lo, hi, op, _, offer = state
        if accept:
            hi = offer
        else:
            lo, op = offer, True
        return (t + 1, lo, hi, op, offer, next_offer)

    def is_terminal(self, state):
        return state[0] > self.horizon

    def key(self, state):
        if self.psi is None:
            # a random sender ignores the bounds, so only time and offer matter
            return (state[0], state[5])
        return state


class ReceiverModel:
    """Bayesian IRL over the three sender types plus Expectimax Q-values."""

    def __init__(self, config: EngineConfig, types=TYPE_SET, prior: Optional[Sequence[float]] = None):
        self.types = tuple(types)
        self.psis = tuple(_psi(t) for t in self.types)
        self.horizon = config.horizon
        self.temperature = config.temperature
        self.gamma = config.gamma
        n = len(self.types)
        self.prior = tuple(prior) if prior is not None else (1.0 / n,) * n
        self._sims = [TypeConditionedReceiver(p, self.horizon, self.temperature) for p in self.psis]
        self._memos = [dict() for _ in self.types]
        self._q = {}

    def likelihoods(self, bounds: SenderBounds, last: int, offer: int) -> tuple:
        lo, hi, op, T = bounds.lower, bounds.upper, bounds.lower_open, self.temperature
        return tuple(offer_probs(p, lo, hi, op, last, T)[offer] for p in self.psis)

    def type_q(self, k: int, t: int, bounds: SenderBounds, last: int, offer: int) -> tuple:
        """(Q(accept), Q(reject)) if the sender is known to be of type k."""
        key = (k, t, bounds.lower, bounds.upper, bounds.lower_open, last, offer)
        hit = self._q.get(key)
        if hit is None:
            state = (t, bounds.lower, bounds.upper, bounds.lower_open, last, offer)
            q = expectimax(state, self.horizon - t, self._sims[k], self.gamma, self._memos[k])
            hit = self._q[key] = (q[True], q[False])
        return hit

    def q_values(self, t: int, belief: Sequence[float], bounds: SenderBounds, last: int,
                 offer: int) -> tuple:
        """Belief-weighted Q; ``belief`` is the posterior after seeing ``offer``."""
        qa = qr = 0.0
        for k, b in enumerate(belief):
            a, r = self.type_q(k, t, bounds, last, offer)
            qa += b * a
            qr += b * r
        return qa, qr


def accept_probability(q_accept: float, q_reject: float, temperature: float) -> float:
    """Two-action softmax, written to stay finite for any gap."""
    z = (q_accept - q_reject) / temperature
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# receiver state and aleph monitor

class NestedReceiverState:
    """Everything the receiver knows after trials 1..t-1.

    It is a pure function of the public history, the common-knowledge prior
    and the mechanism's seed, which is what lets the DoM(1) sender rebuild it
    exactly.  ``cr`` holds the counterfactual cumulative receiver rewards per
    type (in tenths) and ``pacc`` caches acceptance probabilities per offer.
    """

    __slots__ = ("t", "belief", "bounds", "last", "flags", "triggered", "cum", "responses",
                 "observed", "cr", "pacc")

    def __init__(self, t, belief, bounds, last, flags, triggered, cum, responses, observed, cr):
        self.t = t
        self.belief = belief
        self.bounds = bounds
        self.last = last
        self.flags = flags
        self.triggered = triggered
        self.cum = cum
        self.responses = responses
        self.observed = observed
        self.cr = cr
        self.pacc = [None] * N_OFFERS

    @property
    def aleph_flags(self) -> aleph.AlephFlags:
        return aleph.AlephFlags(self.flags, self.t - 1)

    @property
    def cumulative_reward(self) -> float:
        return self.cum / 10.0

    def snapshot(self) -> tuple:
        cr = None if self.cr is None else tuple(None if c is None else c.tobytes() for c in self.cr)
        return (self.t, self.belief, self.bounds, self.last, self.flags, self.triggered, self.cum,
                self.responses, self.observed, cr)

    def __eq__(self, other):
        return isinstance(other, NestedReceiverState) and self.snapshot() == other.snapshot()

    def __hash__(self):
        return hash(self.snapshot())

    def __repr__(self):
        return (f"NestedReceiverState(t={self.t}, belief={self.belief}, bounds={self.bounds}, "
                f"flags={self.flags}, triggered={self.triggered})")


class IugMonitor:
    """Sampling side of the receiver's aleph-mechanism.

    All randomness is drawn up front from the mechanism's own sub-stream as
    common random numbers (one uniform per type, trial and sample for the
    offer, and one for the response), so the flags are a deterministic
    function of the history.  Sample n of a threshold type tracks its own
    bounds, folding its own sampled offers with the receiver's actual
    responses.
    """

    def __init__(self, config: EngineConfig, rng: RandomSource, psis=tuple(_psi(t) for t in TYPE_SET)):
        self.config = config
        self.psis = tuple(psis)
        self.N = config.mechanism_samples
        self.T = config.horizon
        self.u_offer = [rng.child(f"offer/{k}").uniform((self.T, self.N)) for k in range(len(psis))]
        self.u_resp = [rng.child(f"response/{k}").uniform((self.T, self.N)) for k in range(len(psis))]
        self._tracks = {}
        self._bands = {}

    def delta(self, t: int) -> float:
        if self.config.delta_mode == "schedule":
            return aleph.delta_schedule(t, self.T)
        return self.config.delta

    def sample_offers(self, k: int, responses: tuple) -> np.ndarray:
        """(N, t) sampled offer indices for trials 1..t, t = len(responses) + 1."""
        psi = self.psis[k]
        t = len(responses) + 1
        key = (k, responses) if psi is not None else (k, t)
        hit = self._tracks.get(key)
        if hit is not None:
            return hit[0]
        if psi is None:
            offers = np.minimum((self.u_offer[k][:t].T * N_OFFERS).astype(np.int64), N_OFFERS - 1)
            self._tracks[key] = (offers, None)
            return offers
        if t == 1:
            n = self.N
            state = (np.zeros(n, np.int64), np.full(n, 10, np.int64), np.zeros(n, bool),
                     np.full(n, NO_OFFER, np.int64))
            prev = np.zeros((n, 0), np.int64)
        else:
            prev = self.sample_offers(k, responses[:-1])
            _, state = self._tracks[(k, responses[:-1])]
            lo, hi, op, _ = state
            o = prev[:, -1]
            if responses[-1]:
                hi = o.copy()
            else:
                lo, op = o.copy(), np.ones_like(op)
            state = (lo, hi, op, o.copy())
        lo, hi, op, last = state
        u = self.u_offer[k][t - 1]
        new = np.empty(self.N, np.int64)
        cums = {}
        temp = self.config.temperature
        for n in range(self.N):
            sk = (int(lo[n]), int(hi[n]), bool(op[n]), int(last[n]))
            cum = cums.get(sk)
            if cum is None:
                cum = cums[sk] = list(np.cumsum(offer_probs(psi, *sk, temp)))
            new[n] = min(bisect.bisect_right(cum, u[n]), N_OFFERS - 1)
        offers = np.concatenate([prev, new[:, None]], axis=1)
        self._tracks[key] = (offers, state)
        return offers

    def gzip_band(self, k: int, responses: tuple, delta: float) -> tuple:
        t = len(responses) + 1
        key = (k, responses if self.psis[k] is not None else t, delta)
        hit = self._bands.get(key)
        if hit is None:
            offers = self.sample_offers(k, responses) + 0x30
            ratios = [aleph.compression_ratio(row.astype(np.uint8).tobytes()) for row in offers]
            hit = self._bands[key] = aleph.gzip_band(ratios, delta)
        return hit

    def update(self, state: NestedReceiverState, offer: int, accept: bool, profile: Sequence[float],
               observed: bytes, cum_obs: int):
        """Flags and counterfactual cumulative rewards after trial state.t."""
        cfg = self.config
        t = state.t
        responses = state.responses
        delta = self.delta(t)
        p_arr = np.asarray(profile)
        flags, crs = [], []
        c_obs = aleph.compression_ratio(observed) if t >= cfg.gzip_warmup else None
        for k in range(len(self.psis)):
            if not state.flags[k]:
                flags.append(0)
                crs.append(None)
                continue
            offs = self.sample_offers(k, responses)[:, t - 1]
            if cfg.z2_own_action == "policy":
                acc = self.u_resp[k][t - 1] < p_arr[offs]
            else:
                acc = accept
            cr = (state.cr[k] if state.cr is not None and state.cr[k] is not None else 0) + offs * acc
            lo, hi = aleph.quantile_band(cr, cfg.omega)
            z2 = lo <= cum_obs and (cum_obs <= hi or not cfg.z2_two_sided)
            z1 = True
            if c_obs is not None and z2:
                blo, bhi = self.gzip_band(k, responses, delta)
                z1 = blo <= c_obs <= bhi
            flags.append(1 if (z1 and z2) else 0)
            crs.append(cr)
        return tuple(flags), tuple(crs)


class ReceiverDynamics:
    """Transition function of the DoM(0) receiver (optionally aleph-augmented).

    The actual receiver and the DoM(1) sender's nested model both run this
    code, so their states agree bit for bit.
    """

    def __init__(self, config: EngineConfig, mechanism_rng: Optional[RandomSource] = None,
                 aleph_enabled: Optional[bool] = None, model: Optional[ReceiverModel] = None):
        self.config = config
        self.aleph_enabled = config.aleph_enabled if aleph_enabled is None else aleph_enabled
        self.model = model if model is not None else ReceiverModel(config)
        self.horizon = config.horizon
        self.temperature = config.temperature
        self.monitor = None
        if self.aleph_enabled:
            if mechanism_rng is None:
                raise ValueError("the aleph-mechanism needs a random source")
            self.monitor = IugMonitor(config, mechanism_rng, self.model.psis)

    def initial_state(self) -> NestedReceiverState:
        n = len(self.model.types)
        return NestedReceiverState(1, self.model.prior, SenderBounds(), NO_OFFER, (1,) * n, False, 0,
                                   (), b"", None)

    def posterior(self, state: NestedReceiverState, offer: int) -> tuple:
        return posterior_mass(state.belief, self.model.likelihoods(state.bounds, state.last, offer))

    def base_q(self, state: NestedReceiverState, offer: int) -> tuple:
        post = self.posterior(state, offer)
        return self.model.q_values(state.t, post, state.bounds, state.last, offer)

    def accept_prob(self, state: NestedReceiverState, offer: int) -> float:
        """Acceptance probability under the aleph-policy (0 once triggered)."""
        p = state.pacc[offer]
        if p is None:
            if state.triggered:
                p = 0.0
            else:
                qa, qr = self.base_q(state, offer)
                p = accept_probability(qa, qr, self.temperature)
            state.pacc[offer] = p
        return p

    def profile(self, state: NestedReceiverState) -> list:
        return [self.accept_prob(state, i) for i in OFFER_INDICES]

    def step(self, state: NestedReceiverState, offer: int, accept: bool) -> NestedReceiverState:
        if state.t > self.horizon:
            raise ValueError("horizon exhausted")
        post = self.posterior(state, offer)
        b = state.bounds
        bounds = SenderBounds(b.lower, offer, b.lower_open) if accept else SenderBounds(offer, b.upper, True)
        cum = state.cum + (offer if accept else 0)
        observed = state.observed + OFFER_CODES[offer].encode()
        flags, triggered, cr = state.flags, state.triggered, state.cr
        if self.monitor is not None and not triggered:
            flags, cr = self.monitor.update(state, offer, accept, self.profile(state), observed, cum)
            triggered = not any(flags)
        return NestedReceiverState(state.t + 1, post, bounds, offer, flags, triggered, cum,
                                   state.responses + (accept,), observed, cr)

    def replay(self, offers: Sequence, responses: Sequence) -> NestedReceiverState:
        s = self.initial_state()
        for o, r in zip(offers, responses):
            s = self.step(s, _index(o), _accepted(r))
        return s

    def policy(self, state: NestedReceiverState, offer) -> PolicyDistribution:
        p = self.accept_prob(state, _index(offer))
        return PolicyDistribution((Response(True), Response(False)), (p, 1.0 - p))

    def expectations(self, state: NestedReceiverState) -> tuple:
        """Per type: (expected receiver reward, expected sender reward) this trial."""
        prof = self.profile(state)
        out = []
        for psi in self.model.psis:
            probs = offer_probs(psi, state.bounds.lower, state.bounds.upper, state.bounds.lower_open,
                                state.last, self.temperature)
            er = math.fsum(p * prof[i] * i / 10.0 for i, p in enumerate(probs))
            es = math.fsum(p * prof[i] * (10 - i) / 10.0 for i, p in enumerate(probs))
            out.append((er, es))
        return tuple(out)


def dom0_receiver_act(dynamics: ReceiverDynamics, state: NestedReceiverState, offer,
                      rng: RandomSource) -> Response:
    if state.t > dynamics.horizon:
        raise ValueError("horizon exhausted")
    return dynamics.policy(state, offer).sample(rng)


class ReceiverAgent:
    def __init__(self, config: EngineConfig, mechanism_rng: Optional[RandomSource]):
        self.dynamics = ReceiverDynamics(config, mechanism_rng)
        self.state = self.dynamics.initial_state()

    def respond(self, offer: Offer, rng: RandomSource) -> Response:
        return dom0_receiver_act(self.dynamics, self.state, offer, rng)

    def observe(self, record):
        self.state = self.dynamics.step(self.state, record.action_a.index, record.action_b.accept)


# ---------------------------------------------------------------------------
# DoM(1) sender

class SenderSimulator:
    """Planning interface for the DoM(1) sender; opponent = nested receiver."""

    def __init__(self, dynamics: ReceiverDynamics, psi: float):
        self.dyn = dynamics
        self.psi = psi
        self.horizon = dynamics.horizon

    def actions(self, state):
        return OFFER_INDICES

    def opponent_policy(self, state, offer):
        p = self.dyn.accept_prob(state, offer)
        return ((True, p), (False, 1.0 - p))

    def reward(self, state, offer, accept):
        return (1.0 - offer / 10.0 - self.psi) if accept else 0.0

    def transition(self, state, offer, accept):
        return self.dyn.step(state, offer, accept)

    def is_terminal(self, state):
        # after a trigger the receiver rejects for good, so nothing is left to earn
        return state.t > self.horizon or state.triggered

    def rollout(self, state, gamma, rand):
        total, w = 0.0, 1.0
        dyn, psi = self.dyn, self.psi
        while not (state.t > self.horizon or state.triggered):
            offer = int(rand() * N_OFFERS)
            accept = rand() < dyn.accept_prob(state, offer)
            if accept:
                total += w * (1.0 - offer / 10.0 - psi)
            w *= gamma
            state = dyn.step(state, offer, accept)
        return total


def default_c_uct(config: EngineConfig) -> float:
    return config.c_uct if config.c_uct is not None else 2.0


def dom1_sender_q(nested: NestedReceiverState, psi: float, config: EngineConfig,
                  dynamics: ReceiverDynamics, rng: RandomSource, iterations: Optional[int] = None) -> dict:
    budget = config.planner_iterations if iterations is None else iterations
    if budget < 1:
        raise ValueError("planner budget must be >= 1 iteration")
    sim = SenderSimulator(dynamics, psi)
    return ipomcp(nested, budget, default_c_uct(config), config.gamma, sim, rng)


def dom1_sender_act(nested: NestedReceiverState, psi: float, config: EngineConfig,
                    dynamics: ReceiverDynamics, rng: RandomSource) -> Offer:
    q = dom1_sender_q(nested, psi, config, dynamics, rng.child("search"))
    visited = {OFFERS[i]: v for i, v in q.items() if math.isfinite(v)}
    return softmax_policy(visited, config.temperature).sample(rng.child("choice"))


class Dom1Sender:
    """Deceptive DoM(1) sender.  ``aleph_aware`` controls whether its nested
    receiver model includes the mechanism (it is given the mechanism seed)."""

    def __init__(self, psi: float, config: EngineConfig, mechanism_rng: Optional[RandomSource],
                 aleph_aware: bool = True):
        aware = config.aleph_enabled and aleph_aware
        self.psi = psi
        self.config = config
        self.dynamics = ReceiverDynamics(config, mechanism_rng if aware else None, aleph_enabled=aware)
        self.nested = self.dynamics.initial_state()
        self.last_q = None

    def act(self, rng: RandomSource) -> Offer:
        t = self.nested.t
        return dom1_sender_act(self.nested, self.psi, self.config, self.dynamics, rng.child(f"trial/{t}"))

    def observe(self, record):
        self.nested = self.dynamics.step(self.nested, record.action_a.index, record.action_b.accept)
