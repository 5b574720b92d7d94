"""Closed-form model of a flux qubit longitudinally coupled to a SQUID-tunable resonator.

Every function is pure and accepts scalars or numpy arrays (broadcasting);
scalar inputs give Python floats back.
"""

from dataclasses import dataclass
import math

import numpy as np

from .constants import CONSTANTS
from .exceptions import FluxTooCloseToFrustration, ZeroDetuning
from .params import QubitStateSign

DEFAULT_FRUSTRATION_CUTOFF = 1e-3


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _squid_cos(phi_sq, params, cutoff, constants):
    c = np.cos(np.pi * np.asarray(phi_sq, dtype=float) / constants.phi0)
    if np.any(np.abs(c) <= cutoff):
        raise FluxTooCloseToFrustration(
            f"|cos(pi*Phi/Phi0)| <= {cutoff:g}; the SQUID inductance diverges near half-integer flux"
        )
    return c


def squid_inductance(phi_sq, params, cutoff=DEFAULT_FRUSTRATION_CUTOFF, constants=CONSTANTS):
    """Josephson inductance of a symmetric dc-SQUID.

    ``L_SQ = Phi0 / (2 pi * 2 I_c * |cos(pi Phi / Phi0)|)``.
    """
    c = _squid_cos(phi_sq, params, cutoff, constants)
    ic_total = 2.0 * params.squid_critical_current
    return _out(constants.phi0 / (2.0 * np.pi * ic_total * np.abs(c)))


def resonator_frequency(phi_sq, params, cutoff=DEFAULT_FRUSTRATION_CUTOFF, constants=CONSTANTS):
    """Bare resonator angular frequency ``omega_LC / sqrt(1 + L_SQ/L)`` (rad/s)."""
    l_sq = np.asarray(squid_inductance(phi_sq, params, cutoff, constants))
    return _out(params.omega_lc / np.sqrt(1.0 + l_sq / params.inductance_l))


def resonator_slope(phi_sq, params, cutoff=DEFAULT_FRUSTRATION_CUTOFF, constants=CONSTANTS):
    """Analytic d(omega_r)/d(Phi_SQ) in rad/s per Wb."""
    phi0 = constants.phi0
    arg = np.pi * np.asarray(phi_sq, dtype=float) / phi0
    c = _squid_cos(phi_sq, params, cutoff, constants)
    x0 = phi0 / (4.0 * np.pi * params.squid_critical_current * params.inductance_l)
    x = x0 / np.abs(c)
    dx = x0 * np.sign(c) * np.sin(arg) * (np.pi / phi0) / c**2
    return _out(-0.5 * params.omega_lc * (1.0 + x) ** -1.5 * dx)


def energy_detuning(phi_fq, params, constants=CONSTANTS):
    """``epsilon = 2 I_p (Phi_FQ - n Phi0 / 2)`` in joules."""
    phi = np.asarray(phi_fq, dtype=float)
    return _out(2.0 * params.persistent_current * (phi - 0.5 * params.lobe_index * constants.phi0))


def qubit_transition_frequency(epsilon, params, constants=CONSTANTS):
    """Bare qubit splitting ``sqrt(eps^2 + Delta^2) / h`` in Hz."""
    eps = np.asarray(epsilon, dtype=float)
    return _out(np.hypot(eps, params.gap_delta) / constants.h)


def coupling_strength(coupling, qubit, constants=CONSTANTS):
    """Longitudinal coupling ``g = 2 hbar (d omega_r/d Phi) M I_p`` in joules."""
    return (
        2.0
        * constants.hbar
        * coupling.slope_at_bias
        * coupling.mutual_inductance
        * qubit.persistent_current
    )


def dressed_resonator_frequency(
    phi_sq, qubit_state, params, coupling, qubit, cutoff=DEFAULT_FRUSTRATION_CUTOFF, constants=CONSTANTS
):
    """Resonator angular frequency pulled by the qubit's circulating current.

    ``omega_r0 - sigma_z (d omega_r/d Phi) M I_p``; the two branches are split
    by ``g / hbar``.
    """
    sign = int(QubitStateSign(int(qubit_state)))
    omega0 = np.asarray(resonator_frequency(phi_sq, params, cutoff, constants))
    pull = coupling.slope_at_bias * coupling.mutual_inductance * qubit.persistent_current
    return _out(omega0 - sign * pull)


def shifted_qubit_frequency(epsilon, photon_number, g, delta, constants=CONSTANTS):
    """Qubit frequency with ``N`` photons in the resonator (Hz).

    ``h f = sqrt([eps - g (N + 1/2)]^2 + Delta^2)``. ``N`` may be a real mean
    occupation.
    """
    n = np.asarray(photon_number, dtype=float)
    if np.any(n < 0):
        raise ValueError("photon_number must be non-negative")
    x = np.asarray(epsilon, dtype=float) - g * (n + 0.5)
    return _out(np.hypot(x, delta) / constants.h)


@dataclass(frozen=True)
class LinearizedFrequency:
    frequency: float
    validity_ratio: float


def linearized_qubit_frequency(epsilon, photon_number, g, delta=None, constants=CONSTANTS):
    """Large-detuning form ``|eps - g (N + 1/2)| / h``.

    Returns a :class:`LinearizedFrequency`; ``validity_ratio`` is
    ``|eps - g (N + 1/2)| / Delta`` (``inf`` when ``delta`` is 0 or omitted)
    and the approximation is good when it is >> 1.
    """
    n = np.asarray(photon_number, dtype=float)
    x = np.abs(np.asarray(epsilon, dtype=float) - g * (n + 0.5))
    if delta is None:
        ratio = np.full_like(x, np.inf)
    else:
        d = np.abs(np.asarray(delta, dtype=float))
        with np.errstate(divide="ignore"):
            ratio = np.where(d == 0, np.inf, x / np.where(d == 0, 1.0, d))
    return LinearizedFrequency(_out(x / constants.h), _out(ratio))


def linearization_error(validity_ratio):
    """Relative error of the linearized frequency, measured against the linear value.

    ``(sqrt(1 + r^2) - r) / r`` for ``r = |eps - g(N+1/2)| / Delta``.
    """
    r = np.asarray(validity_ratio, dtype=float)
    return _out(np.sqrt(1.0 + r**-2) - 1.0)


@dataclass(frozen=True)
class DispersiveShift:
    frequency: float
    per_photon: float
    dispersive: bool


def dispersive_shift_comparator(g_c, delta_detuning, photon_number, constants=CONSTANTS):
    """Transverse-coupling ac Stark shift ``(g_c^2 / delta) N / h`` for contrast.

    ``dispersive`` flags whether ``|g_c / delta| < 1``.
    """
    if delta_detuning == 0:
        raise ZeroDetuning("dispersive shift undefined at zero detuning")
    per_photon = g_c**2 / delta_detuning / constants.h
    n = np.asarray(photon_number, dtype=float)
    return DispersiveShift(
        _out(per_photon * n), float(per_photon), bool(abs(g_c / delta_detuning) < 1.0)
    )


def photons_for_frequency(target_frequency, epsilon, g, delta, constants=CONSTANTS, branch=+1):
    """Invert the shifted-frequency formula for the mean photon number.

    Solves ``eps - g (N + 1/2) = branch * sqrt((h f)^2 - Delta^2)`` for ``N``.
    ``branch=+1`` is the root reached when ``g > 0`` pushes ``eps - g(N+1/2)``
    negative.
    """
    hf = target_frequency * constants.h
    if hf < delta:
        raise ValueError("target frequency lies below the gap")
    root = math.sqrt(hf**2 - delta**2)
    return (epsilon + branch * root) / g - 0.5
