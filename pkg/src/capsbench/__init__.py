"""Capsule networks and their classical baselines, from scratch on numpy."""

__version__ = "0.1.0"
