"""Pulse-level simulation of a two-photon CCZ gate on three transmons."""

__version__ = "0.1.0"
