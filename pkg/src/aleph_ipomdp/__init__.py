"""Deception and counter-deception between theory-of-mind agents.

Nested-belief agents (DoM levels -1..2) play an iterated ultimatum game and
a Bayesian zero-sum game; the aleph-mechanism lets a victim notice that its
opponent behaves outside every type it models.
"""

__version__ = "0.1.0"

from .core import (BeliefVector, ConfigError, EngineConfig, History, ImpossibleObservation,
                   PolicyDistribution, RandomSource, RewardMaskedError, TrialRecord)

__all__ = ["__version__", "BeliefVector", "ConfigError", "EngineConfig", "History",
           "ImpossibleObservation", "PolicyDistribution", "RandomSource", "RewardMaskedError",
           "TrialRecord"]
