"""Functional simulator and analytical cost models for a single-timestep
spiking CNN accelerator with an output-stationary dataflow."""

__version__ = "0.1.0"
