"""Simulate and analyse multi-stage group leader elections (Lost at Sea)."""

__version__ = "0.1.0"
