"""Temporal pruning trainer for the snnaccel simulator."""

__version__ = "0.1.0"
