"""Immutable parameter records for the resonator, the flux qubit and their coupling.

All fields are SI. Engineering units (GHz, pH, nA, mPhi0) are handled by
:mod:`fluxshift.config` at the boundary.
"""

from dataclasses import dataclass, field, replace
from enum import IntEnum
import math

from .constants import CONSTANTS, PhysicalConstants
from .exceptions import ValidationError


def _require_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class ResonatorParams:
    """Lumped LC resonator with a symmetric dc-SQUID in series with ``L``.

    Use :meth:`from_lc` unless ``omega_lc`` is already known; construction
    rejects an ``omega_lc`` that disagrees with ``(L C)^-1/2``.
    """

    omega_lc: float
    inductance_l: float
    capacitance_c: float
    squid_critical_current: float

    def __post_init__(self):
        for name in ("omega_lc", "inductance_l", "capacitance_c", "squid_critical_current"):
            _require_positive(name, getattr(self, name))
        expected = 1.0 / math.sqrt(self.inductance_l * self.capacitance_c)
        if abs(self.omega_lc - expected) > 1e-9 * expected:
            raise ValidationError(
                f"omega_lc={self.omega_lc!r} inconsistent with (LC)^-1/2={expected!r}"
            )

    @classmethod
    def from_lc(cls, inductance_l, capacitance_c, squid_critical_current):
        _require_positive("inductance_l", inductance_l)
        _require_positive("capacitance_c", capacitance_c)
        omega = 1.0 / math.sqrt(inductance_l * capacitance_c)
        return cls(omega, inductance_l, capacitance_c, squid_critical_current)

    @classmethod
    def from_omega(cls, omega_lc, inductance_l, squid_critical_current):
        """Build from the bare angular frequency with ``C`` derived from ``L``."""
        _require_positive("omega_lc", omega_lc)
        _require_positive("inductance_l", inductance_l)
        capacitance = 1.0 / (omega_lc**2 * inductance_l)
        return cls(omega_lc, inductance_l, capacitance, squid_critical_current)


@dataclass(frozen=True)
class FluxQubitParams:
    """Two-level flux qubit: gap ``Delta`` (J), persistent current (A), lobe index ``n``."""

    gap_delta: float
    persistent_current: float
    lobe_index: int = -3

    def __post_init__(self):
        _require_positive("gap_delta", self.gap_delta)
        _require_positive("persistent_current", self.persistent_current)
        if int(self.lobe_index) != self.lobe_index or int(self.lobe_index) % 2 == 0:
            raise ValidationError(f"lobe_index must be an odd integer, got {self.lobe_index!r}")
        object.__setattr__(self, "lobe_index", int(self.lobe_index))

    def sweet_spot(self, constants=CONSTANTS):
        """Flux (Wb) at which the energy detuning vanishes."""
        return 0.5 * self.lobe_index * constants.phi0


@dataclass(frozen=True)
class CouplingParams:
    """Mutual inductance ``M`` (H) and resonator slope at the operating point (rad/s/Wb)."""

    mutual_inductance: float
    slope_at_bias: float

    def __post_init__(self):
        _require_positive("mutual_inductance", self.mutual_inductance)
        if not math.isfinite(self.slope_at_bias):
            raise ValidationError("slope_at_bias must be finite")


class QubitStateSign(IntEnum):
    """Eigenvalue of sigma_z, i.e. the circulating-current direction."""

    PLUS = 1
    MINUS = -1


@dataclass(frozen=True)
class DeviceParams:
    """Everything needed to simulate one device at one operating point.

    ``phi_sq`` is the flux through the SQUID loop and ``phi_fq`` the absolute
    flux through the qubit loop, both in Wb. Linewidths are FWHM in Hz.
    """

    resonator: ResonatorParams
    qubit: FluxQubitParams
    coupling: CouplingParams
    phi_sq: float
    phi_fq: float
    resonator_linewidth: float = 5e6
    qubit_linewidth: float = 20e6
    constants: PhysicalConstants = field(default=CONSTANTS, repr=False)

    def __post_init__(self):
        _require_positive("resonator_linewidth", self.resonator_linewidth)
        _require_positive("qubit_linewidth", self.qubit_linewidth)

    @classmethod
    def with_bias(cls, resonator, qubit, coupling, phi_sq, qubit_bias, **kwargs):
        """Place the qubit ``qubit_bias`` Wb away from its sweet spot."""
        constants = kwargs.get("constants", CONSTANTS)
        return cls(resonator, qubit, coupling, phi_sq, qubit.sweet_spot(constants) + qubit_bias, **kwargs)

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def qubit_bias(self):
        return self.phi_fq - self.qubit.sweet_spot(self.constants)

    @property
    def epsilon(self):
        from .model import energy_detuning

        return energy_detuning(self.phi_fq, self.qubit, self.constants)

    @property
    def g(self):
        from .model import coupling_strength

        return coupling_strength(self.coupling, self.qubit, self.constants)

    @property
    def omega_r0(self):
        from .model import resonator_frequency

        return resonator_frequency(self.phi_sq, self.resonator, constants=self.constants)

    @property
    def resonator_frequency_hz(self):
        return self.omega_r0 / (2.0 * math.pi)
