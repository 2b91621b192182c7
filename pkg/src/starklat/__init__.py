"""Desk-scale numerics for interacting Stark-localized particles on the 1D lattice."""

__version__ = "0.1.0"
