"""Quantum harmonic-oscillator heat engine driven through a modulated bath contact."""

__version__ = "0.1.0"
