"""Headless surgical irrigation/suction simulator and robot-learning stack."""

__version__ = "0.1.0"
