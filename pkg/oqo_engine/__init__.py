"""Operational quantum observables in a truncated Fock space."""

__version__ = "0.1.0"
