"""Stability of degenerate complex Monge-Ampere equations: exponents, the
radial sharpness example, and a discrete solver with capacity checks."""

__version__ = "0.1.0"
