"""Carleman linearization of discretized reaction-diffusion equations.

Classical numerical library and CLI for building discrete reaction-diffusion
systems, lifting them through truncated Carleman linearization, measuring
truncation error against convergence-radius predictions, and auditing the
decay and linear-system bounds that control the overall error budget.
"""

__version__ = "0.1.0"
