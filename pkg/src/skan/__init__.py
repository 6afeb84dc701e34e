"""Cycle-accurate simulator for synapto-dendritic kernel adapting neurons."""

__version__ = "0.1.0"
