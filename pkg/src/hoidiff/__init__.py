"""Tri-variate sequence diffusion for egocentric human-object interaction."""

__version__ = "0.1.0"
