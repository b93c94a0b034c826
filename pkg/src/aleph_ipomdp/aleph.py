"""The aleph-mechanism (typicality and counterfactual-reward checks joined by a
recursive conjunction) and the aleph-policy that switches to an
out-of-belief fallback once every modeled type has been denied.

The functions here are game-agnostic.  Games supply the per-type model
frequencies, sampled action sequences and sampled cumulative rewards.
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from .core import ROWS, PolicyDistribution, RandomSource, Response, Row


@dataclass(frozen=True)
class AlephFlags:
    flags: tuple
    trial: int = 0

    def __post_init__(self):
        if any(f not in (0, 1) for f in self.flags):
            raise ValueError("flags are binary")

    @classmethod
    def initial(cls, n_types: int) -> "AlephFlags":
        return cls((1,) * n_types, 0)

    @property
    def triggered(self) -> bool:
        """True once no modeled type passes the mechanism."""
        return not any(self.flags)

    def __len__(self) -> int:
        return len(self.flags)


@dataclass(frozen=True)
class SampledTrajectorySet:
    """Per type, N sampled opponent-action sequences of equal length t."""
    sequences: tuple  # tuple (per type) of tuple of bytes

    def __post_init__(self):
        for per_type in self.sequences:
            if len({len(s) for s in per_type}) > 1:
                raise ValueError("sampled sequences of one type must share a length")


@dataclass(frozen=True)
class SampledRewardSet:
    """Per type, N sampled reward sequences; ``cumulative`` holds their sums."""
    rewards: tuple  # tuple (per type) of 2-D arrays, shape (N, t)

    @property
    def cumulative(self) -> tuple:
        return tuple(np.asarray(r).sum(axis=1) for r in self.rewards)


def delta_schedule(t: int, T: int) -> float:
    if not 1 <= t <= T:
        raise ValueError("trial must lie in [1, T]")
    return max((T - t) / t, 0.5)


def quantile_index(p: float, n: int) -> int:
    """0-based position of the nearest-rank p-quantile among n sorted values."""
    if n < 1:
        raise ValueError("empty sample")
    # the epsilon keeps e.g. 0.1 * 200 = 20.000000000000004 from rounding up
    return min(max(math.ceil(p * n - 1e-9) - 1, 0), n - 1)


def quantile_band(values, p: float):
    """(q_p, q_{1-p}) by nearest rank; q_0 is the minimum and q_1 the maximum."""
    arr = np.asarray(values)
    n = arr.shape[0]
    lo, hi = quantile_index(p, n), quantile_index(1.0 - p, n)
    part = np.partition(arr, (lo, hi)) if n > 1 else arr
    return part[lo], part[hi]


def encode_actions(actions) -> bytes:
    """One byte per action, using each action's ``code`` character."""
    return "".join(a.code for a in actions).encode("ascii")


@lru_cache(maxsize=1 << 18)
def compression_ratio(data: bytes) -> float:
    if not data:
        raise ValueError("cannot compress an empty sequence")
    return len(gzip.compress(data, compresslevel=9, mtime=0)) / len(data)


# absorbs rounding in the averaged frequencies so an exact match passes at delta=0
_FREQ_TOL = 1e-12


def z1_delta(observed: Sequence[int], model_dists: Sequence[Sequence[Sequence[float]]],
             delta: float) -> tuple:
    """Strong-typicality check against time-averaged model frequencies.

    ``observed`` are action indices for trials 1..t; ``model_dists[k][tau]``
    is type k's predicted distribution at trial tau+1 given the history
    before it.
    """
    t = len(observed)
    if t == 0:
        return (1,) * len(model_dists)
    flags = []
    for dists in model_dists:
        if len(dists) != t:
            raise ValueError("one model distribution per observed trial is needed")
        fbar = np.mean(np.asarray(dists, dtype=float), axis=0)
        fhat = np.bincount(np.asarray(observed), minlength=fbar.shape[0]) / t
        ok = True
        for a in range(fbar.shape[0]):
            if fbar[a] == 0.0:
                if fhat[a] > 0.0:
                    ok = False
                    break
            elif abs(fhat[a] - fbar[a]) > delta * fbar[a] + _FREQ_TOL:
                ok = False
                break
        flags.append(1 if ok else 0)
    return tuple(flags)


def gzip_band(sample_ratios, delta: float):
    return quantile_band(sample_ratios, delta)


def z1_gzip(observed: bytes, samples: SampledTrajectorySet, delta: float, warmup: int = 3) -> tuple:
    """Compression-ratio typicality: affirm type k iff the observed ratio lies
    inside the [q_delta, q_{1-delta}] band of type k's sampled ratios."""
    n_types = len(samples.sequences)
    if len(observed) < warmup:
        return (1,) * n_types
    c_obs = compression_ratio(observed)
    flags = []
    for per_type in samples.sequences:
        if len(per_type) < 2:
            raise ValueError("sample size too small")
        ratios = [compression_ratio(s) for s in per_type]
        lo, hi = gzip_band(ratios, delta)
        flags.append(1 if lo <= c_obs <= hi else 0)
    return tuple(flags)


def z2_reward(observed_cumulative: float, cumulative_samples: Sequence, omega: float,
              masked: bool = False, two_sided: bool = True) -> tuple:
    """Counterfactual cumulative-reward check, one flag per type."""
    n_types = len(cumulative_samples)
    if masked:
        return (1,) * n_types
    flags = []
    for cr in cumulative_samples:
        if len(cr) == 0:
            raise ValueError("empty reward set")
        lo, hi = quantile_band(cr, omega)
        ok = lo <= observed_cumulative and (observed_cumulative <= hi or not two_sided)
        flags.append(1 if ok else 0)
    return tuple(flags)


def combine(f_prev: AlephFlags, z1: Sequence[int], z2: Sequence[int]) -> AlephFlags:
    if not len(f_prev.flags) == len(z1) == len(z2):
        raise ValueError("flag vectors differ in length")
    return AlephFlags(tuple(int(a and b and c) for a, b, c in zip(f_prev.flags, z1, z2)),
                      f_prev.trial + 1)


PolicyLike = Union[PolicyDistribution, Callable[..., PolicyDistribution]]


def aleph_policy(belief, flags: AlephFlags, base_policy: PolicyLike, oob_policy: PolicyLike,
                 rng: RandomSource):
    """Act from the base policy while any type is affirmed, else out-of-belief."""
    chosen = base_policy if any(flags.flags) else oob_policy
    dist = chosen(belief) if callable(chosen) else chosen
    return dist.sample(rng)


def grim_trigger() -> PolicyDistribution:
    return PolicyDistribution((Response(True), Response(False)), (0.0, 1.0))


def minmax_row(matrix) -> Row:
    """Row maximizing the worst-case payoff; lowest index wins ties."""
    entries = getattr(matrix, "entries", matrix)
    worst = [min(row) for row in entries]
    best = max(range(len(worst)), key=lambda i: (worst[i], -i))
    return ROWS[best]


def minmax_policy(matrix) -> PolicyDistribution:
    r = minmax_row(matrix)
    return PolicyDistribution(ROWS, tuple(1.0 if x == r else 0.0 for x in ROWS))


__all__ = [
    "AlephFlags", "SampledTrajectorySet", "SampledRewardSet", "delta_schedule", "quantile_index",
    "quantile_band", "encode_actions", "compression_ratio", "z1_delta", "z1_gzip", "z2_reward",
    "combine", "aleph_policy", "grim_trigger", "minmax_row", "minmax_policy",
]
