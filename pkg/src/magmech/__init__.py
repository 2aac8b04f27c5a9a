"""Quantum-noise model of a cavity-magnomechanical weak-force sensor."""

__version__ = "0.1.0"
