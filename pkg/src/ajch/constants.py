"""Physical constants (CODATA 2018), SI units.

Pinned here rather than taken from ``scipy.constants`` so results do not
move when scipy updates its CODATA release.
"""

from math import pi

ELEMENTARY_CHARGE = 1.602176634e-19  # C (exact)
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg
HBAR = 1.054571817e-34  # J s (exact)

CA40_MASS = 40 * ATOMIC_MASS_UNIT

# e^2 / (4 pi eps0), J m
COULOMB_CONSTANT_E2 = ELEMENTARY_CHARGE**2 / (4 * pi * VACUUM_PERMITTIVITY)

TWO_PI = 2 * pi
