"""Quantum earth mover's distance estimation and qWGAN training."""

__version__ = "0.1.0"
