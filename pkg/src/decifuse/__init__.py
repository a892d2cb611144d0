"""Distributed detection over fading channels: simulation, fusion rules and error bounds."""

__version__ = "0.1.0"
