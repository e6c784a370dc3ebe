"""Iterated Hadamard transforms of continuous i.i.d. sources.

The package evolves conditional densities along polarization paths by
successive cancellation and measures the resulting entropy, variance and
Fisher information sequences.
"""

__version__ = "0.1.0"
