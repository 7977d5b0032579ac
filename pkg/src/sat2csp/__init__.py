"""Desk-scale 3-SAT to 2-CSP reduction machinery with exhaustive verifiers."""

__version__ = "0.1.0"
