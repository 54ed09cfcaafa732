"""Certification of unique solvability for discrete Helmholtz problems with Robin boundary."""

__version__ = "0.1.0"
