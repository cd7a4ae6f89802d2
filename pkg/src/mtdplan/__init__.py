"""Uncertainty-aware moving target defense planning: POMCP, Bayes-adaptive models, and a cluster-defense simulator."""

__version__ = "0.1.0"
