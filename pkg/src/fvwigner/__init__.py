"""Relativistic Wigner functions for scalar charged particles."""
__version__ = "0.1.0"
