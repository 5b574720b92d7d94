"""Driven-resonator photon statistics and the joint qubit-resonator spectrum."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats

from .exceptions import TruncationTooSmall, ValidationError
from .model import shifted_qubit_frequency

TAIL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class DriveMapping:
    """Linear map from generator power (W) to on-resonance mean photon number."""

    power_to_photons: float
    power_reference: str = "generator output"

    def __post_init__(self):
        if not (self.power_to_photons >= 0 and math.isfinite(self.power_to_photons)):
            raise ValidationError("power_to_photons must be finite and >= 0")


@dataclass(frozen=True)
class PhotonDistribution:
    mean_n: float
    weights: np.ndarray = field(repr=False)
    truncation_nmax: int

    @property
    def photon_numbers(self):
        return np.arange(self.truncation_nmax + 1)


def default_truncation(mean_n):
    """Smallest ``nmax`` satisfying ``nmax >= nbar + 10 sqrt(nbar) + 20``."""
    return int(math.ceil(mean_n + 10.0 * math.sqrt(mean_n) + 20.0))


def poisson_weights(mean_n, nmax=None):
    """Coherent-state (Poisson) occupation probabilities on ``0..nmax``.

    Weights are computed in log space and renormalised over the truncated
    range. Raises :class:`TruncationTooSmall` if the discarded tail exceeds
    1e-6.
    """
    if not (mean_n >= 0 and math.isfinite(mean_n)):
        raise ValidationError(f"mean_n must be finite and >= 0, got {mean_n!r}")
    if nmax is None:
        nmax = default_truncation(mean_n)
    nmax = int(nmax)
    if nmax < 0:
        raise ValidationError("nmax must be >= 0")
    n = np.arange(nmax + 1)
    if mean_n == 0:
        weights = np.zeros(nmax + 1)
        weights[0] = 1.0
        return PhotonDistribution(0.0, weights, nmax)
    tail = stats.poisson.sf(nmax, mean_n)
    if tail > TAIL_TOLERANCE:
        raise TruncationTooSmall(
            f"Poisson tail beyond nmax={nmax} is {tail:.3g} for mean {mean_n:g}"
        )
    logw = stats.poisson.logpmf(n, mean_n)
    weights = np.exp(logw - logw.max())
    weights /= weights.sum()
    return PhotonDistribution(float(mean_n), weights, nmax)


def power_to_mean_photons(power, mapping, drive_detuning, linewidth_kappa):
    """Steady-state mean photon number for a drive detuned from resonance.

    ``nbar = alpha P (kappa/2)^2 / ((kappa/2)^2 + detuning^2)`` with
    ``kappa`` the resonator FWHM in Hz.
    """
    if linewidth_kappa <= 0:
        raise ValidationError("linewidth_kappa must be > 0")
    p = np.asarray(power, dtype=float)
    if np.any(p < 0):
        raise ValidationError("power must be >= 0")
    half = 0.5 * linewidth_kappa
    d = np.asarray(drive_detuning, dtype=float)
    nbar = mapping.power_to_photons * p * half**2 / (half**2 + d**2)
    return float(nbar) if nbar.ndim == 0 else nbar


@dataclass(frozen=True)
class Level:
    n: int
    branch: str
    energy: float


@dataclass(frozen=True)
class Transition:
    start: tuple
    end: tuple
    frequency: float
    kind: str


@dataclass
class TransitionCatalog:
    """Eigenvalues and transitions of the block-diagonal joint Hamiltonian.

    ``energies`` has shape ``(nmax + 1, 2)`` with columns (lower, upper).
    """

    energies: np.ndarray
    transitions: list
    nmax: int

    @property
    def entries(self):
        return [
            Level(n, branch, float(self.energies[n, k]))
            for n in range(self.nmax + 1)
            for k, branch in enumerate(("lower", "upper"))
        ]

    def qubit_frequencies(self):
        return np.array([t.frequency for t in self.transitions if t.kind == "qubit-like"])

    def resonator_frequencies(self, branch="lower"):
        return np.array(
            [t.frequency for t in self.transitions if t.kind == "resonator-like" and t.start[1] == branch]
        )


def block_energies(epsilon, g, delta, hbar_omega, nmax):
    """Analytic eigenvalues ``E_pm(n)`` of each 2x2 photon block, shape (nmax+1, 2)."""
    n = np.arange(nmax + 1) + 0.5
    half_split = 0.5 * np.hypot(epsilon - g * n, delta)
    centre = hbar_omega * n
    return np.column_stack([centre - half_split, centre + half_split])


def joint_hamiltonian_matrix(epsilon, g, delta, hbar_omega, nmax):
    """Dense matrix of the joint Hamiltonian truncated at ``nmax`` photons.

    Basis ordering is ``|n, sigma_z = +1>, |n, sigma_z = -1>`` for n = 0..nmax.
    Built from explicit ``a^dagger a`` and Pauli operators so it can serve as an
    independent check on :func:`block_energies`.
    """
    dim_r = nmax + 1
    a = np.diag(np.sqrt(np.arange(1, dim_r)), k=1)
    num = a.T @ a
    eye_r = np.eye(dim_r)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.diag([1.0, -1.0])
    eye_q = np.eye(2)
    occ = num + 0.5 * eye_r
    h = (
        0.5 * delta * np.kron(eye_r, sx)
        + np.kron(0.5 * epsilon * eye_r - 0.5 * g * occ, sz)
        + hbar_omega * np.kron(occ, eye_q)
    )
    return h


def joint_spectrum(device, nmax):
    """Per-block eigenvalues and allowed transitions for ``device``."""
    if nmax < 1:
        raise ValidationError("nmax must be >= 1")
    const = device.constants
    hbar_omega = const.hbar * device.omega_r0
    energies = block_energies(device.epsilon, device.g, device.qubit.gap_delta, hbar_omega, nmax)
    h = const.h
    transitions = []
    for n in range(nmax + 1):
        transitions.append(
            Transition((n, "lower"), (n, "upper"), float((energies[n, 1] - energies[n, 0]) / h), "qubit-like")
        )
    for n in range(nmax):
        for k, branch in enumerate(("lower", "upper")):
            transitions.append(
                Transition(
                    (n, branch),
                    (n + 1, branch),
                    float((energies[n + 1, k] - energies[n, k]) / h),
                    "resonator-like",
                )
            )
    return TransitionCatalog(energies, transitions, nmax)


def lorentzian(f, centre, linewidth):
    """Unit-area Lorentzian with full width at half maximum ``linewidth``."""
    hw = 0.5 * linewidth
    return (hw / np.pi) / ((np.asarray(f, dtype=float) - centre) ** 2 + hw**2)


_WEIGHT_FLOOR = 1e-15


def _weighted_sum(device, dist, probe, linewidth, peak_normalized):
    probe = np.asarray(probe, dtype=float)
    w = np.asarray(dist.weights)
    keep = np.flatnonzero(w > _WEIGHT_FLOOR)
    centres = shifted_qubit_frequency(
        device.epsilon, keep, device.g, device.qubit.gap_delta, device.constants
    )
    centres = np.atleast_1d(centres)
    hw = 0.5 * linewidth
    out = np.zeros_like(probe)
    # accumulate in photon-number order for reproducibility
    for wn, fn in zip(w[keep], centres):
        out += wn / (1.0 + ((probe - fn) / hw) ** 2)
    if not peak_normalized:
        out /= np.pi * hw
    return out


def photon_weighted_lineshape(device, dist, probe_grid, linewidth):
    """Poisson-weighted sum of unit-area Lorentzians at the shifted qubit frequencies."""
    if linewidth <= 0:
        raise ValidationError("linewidth must be > 0")
    return _weighted_sum(device, dist, probe_grid, linewidth, peak_normalized=False)


def photon_weighted_contrast(device, dist, probe_grid, linewidth):
    """Same lineshape rescaled so a single component peaks at 1 (range [0, 1])."""
    if linewidth <= 0:
        raise ValidationError("linewidth must be > 0")
    return _weighted_sum(device, dist, probe_grid, linewidth, peak_normalized=True)
