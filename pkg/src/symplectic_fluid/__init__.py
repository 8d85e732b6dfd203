"""Symplectic structure of incompressible flow on space-time and helicity-current diagnostics."""

__version__ = "0.1.0"
