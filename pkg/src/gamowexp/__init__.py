"""Resonance (Gamow-vector) expansion of 1D Schrodinger evolution with a Borel-summed dispersive part."""
__version__ = "0.1.0"
