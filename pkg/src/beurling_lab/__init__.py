"""Numerical laboratory for the Beurling transform of characteristic functions
of planar Lipschitz and chord-arc domains and Besov regularity of their
boundaries."""

__version__ = "0.1.0"
