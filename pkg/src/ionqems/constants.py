"""CODATA-2018 physical constants (SI units).

The table is deliberately tiny and hand-transcribed. ``tests/test_device.py``
checks it against two independent transcriptions: a second literal copy and
``scipy.constants`` (which may carry a newer adjustment, hence a loose 1e-8
relative tolerance there). A serialized copy lives in ``docs/constants.md``.
"""

from __future__ import annotations

import math

# Exact defining constants of the 2019 SI redefinition.
PLANCK = 6.62607015e-34  # J s
HBAR = PLANCK / (2.0 * math.pi)  # J s
ELEMENTARY_CHARGE = 1.602176634e-19  # C
BOLTZMANN = 1.380649e-23  # J / K

# Measured constants, CODATA-2018 adjustment.
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F / m
ATOMIC_MASS = 1.66053906660e-27  # kg

# Coulomb constant k = 1/(4 pi eps0).
COULOMB = 1.0 / (4.0 * math.pi * VACUUM_PERMITTIVITY)  # N m^2 / C^2


def as_dict() -> dict[str, float]:
    """Return the constants table as name -> SI value."""
    return {
        "planck": PLANCK,
        "hbar": HBAR,
        "elementary_charge": ELEMENTARY_CHARGE,
        "boltzmann": BOLTZMANN,
        "vacuum_permittivity": VACUUM_PERMITTIVITY,
        "atomic_mass": ATOMIC_MASS,
        "coulomb": COULOMB,
    }
