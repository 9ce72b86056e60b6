"""Unit system shared by every module.

Internally all formulas carry explicit hbar and mass factors; the default
system is hbar = m = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Units:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError(f"hbar and mass must be positive, got {self.hbar}, {self.mass}")

    @property
    def hbar_over_m(self) -> float:
        return self.hbar / self.mass

    def energy(self, k):
        """Free-particle energy hbar^2 k^2 / 2m."""
        return self.hbar**2 * np.square(k) / (2.0 * self.mass)

    def wavenumber_sq(self, energy):
        """2 m E / hbar^2, the squared wavenumber belonging to a kinetic energy."""
        return 2.0 * self.mass * np.asarray(energy) / self.hbar**2


DEFAULT_UNITS = Units()
