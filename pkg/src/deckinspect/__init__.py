"""Simulated robotic bridge-deck inspection: navigation, crack maps and NDE condition maps."""

__version__ = "0.1.0"
