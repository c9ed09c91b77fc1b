"""Discrete-time conventional and high-performance disturbance observers for servo control."""

__version__ = "0.1.0"
