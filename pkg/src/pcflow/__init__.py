"""Pluriclosed flow on the flat complex torus."""

__version__ = "0.1.0"
