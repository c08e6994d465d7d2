"""Resonant amplitude dynamics and small-data growth experiments for Schrödinger equations on the torus."""

__version__ = "0.1.0"
