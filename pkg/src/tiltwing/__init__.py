"""Minimum-thrust transition trajectories for tiltwing VTOL aircraft."""

__version__ = "0.1.0"
