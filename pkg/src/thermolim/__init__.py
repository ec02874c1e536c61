"""Numerical laboratory for ergodic theorems of almost additive fields."""

__version__ = "0.1.0"
