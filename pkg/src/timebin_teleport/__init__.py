"""Simulation and analysis of heralded time-bin qubit teleportation."""

__version__ = "0.1.0"
