"""Anti-Jaynes-Cummings-Hubbard dynamics of trapped-ion chains.

Hamiltonians, polariton algebra, open-system evolution and the pulse
sequences used to read out polariton populations.
"""

__version__ = "0.1.0"
