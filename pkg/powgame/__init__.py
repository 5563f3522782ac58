"""
powgame - evolutionary-game model of proof-of-work mining participation.

Replicator dynamics, equilibrium and bifurcation analysis, hysteresis sweeps,
reward-feedback controller synthesis and a finite-population validator.
"""

__version__ = "0.1.0"
