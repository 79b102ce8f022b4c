"""Constrained contextual Bayesian optimization for room-heating PI controllers."""

__version__ = "0.1.0"
