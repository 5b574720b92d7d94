"""Physical constants and unit helpers (SI throughout)."""

from dataclasses import dataclass, field
import math

from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants; ``phi0`` and ``hbar`` are derived from ``h`` and ``e``."""

    h: float = _sc.h
    e: float = _sc.e
    hbar: float = field(init=False)
    phi0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "hbar", self.h / (2.0 * math.pi))
        object.__setattr__(self, "phi0", self.h / (2.0 * self.e))


CONSTANTS = PhysicalConstants()

H = CONSTANTS.h
HBAR = CONSTANTS.hbar
E_CHARGE = CONSTANTS.e
PHI0 = CONSTANTS.phi0
MU0 = _sc.mu_0

# engineering-unit scale factors
GHZ = 1e9
MHZ = 1e6
PICO = 1e-12
FEMTO = 1e-15
NANO = 1e-9
MICRO = 1e-6
MILLI = 1e-3


def hz_to_joule(f):
    return f * H


def joule_to_hz(energy):
    return energy / H
