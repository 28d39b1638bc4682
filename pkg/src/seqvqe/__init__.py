"""Qubit-efficient sequential VQE simulator with analog zero-noise extrapolation."""

__version__ = "0.1.0"
