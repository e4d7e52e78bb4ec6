"""Two-decoder persuasion source coding: solver, oracles and block simulator."""

__version__ = "0.1.0"
