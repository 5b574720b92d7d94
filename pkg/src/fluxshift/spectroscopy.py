"""Synthetic spectroscopy: resonator/qubit flux sweeps, two-tone maps and power sweeps.

Maps are evaluated column by column (one column per x value). Columns are
independent and may be computed on a thread pool; noise for column ``ix`` is
drawn from a generator seeded with ``(seed, ix)`` so the result does not depend
on the number of workers.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np

from .exceptions import ValidationError
from .model import DEFAULT_FRUSTRATION_CUTOFF, qubit_transition_frequency, resonator_frequency
from .photon import photon_weighted_contrast, poisson_weights, power_to_mean_photons

AXIS_UNITS = {
    "phi_sq": "Wb",
    "phi_fq": "Wb",
    "pump_frequency": "Hz",
    "power": "W",
    "probe_frequency": "Hz",
}


def _strictly_monotone(a):
    d = np.diff(a)
    return bool(np.all(d > 0) or np.all(d < 0))


@dataclass
class SweepGrid:
    x_axis: np.ndarray
    y_axis: np.ndarray
    x_kind: str = "phi_sq"
    y_kind: str = "probe_frequency"

    def __post_init__(self):
        self.x_axis = np.asarray(self.x_axis, dtype=float).ravel()
        self.y_axis = np.asarray(self.y_axis, dtype=float).ravel()
        for name, ax in (("x_axis", self.x_axis), ("y_axis", self.y_axis)):
            if ax.size == 0:
                raise ValidationError(f"{name} must be non-empty")
            if not np.all(np.isfinite(ax)):
                raise ValidationError(f"{name} must be finite")
            if ax.size > 1 and not _strictly_monotone(ax):
                raise ValidationError(f"{name} must be strictly monotone")
        for kind in (self.x_kind, self.y_kind):
            if kind not in AXIS_UNITS:
                raise ValidationError(f"unknown axis kind {kind!r}")

    @property
    def shape(self):
        return (self.x_axis.size, self.y_axis.size)

    @property
    def metadata(self):
        return {
            "x_kind": self.x_kind,
            "x_unit": AXIS_UNITS[self.x_kind],
            "y_kind": self.y_kind,
            "y_unit": AXIS_UNITS[self.y_kind],
        }


@dataclass(frozen=True)
class NoiseSpec:
    amplitude_sigma: float = 0.0
    ripple_amplitude: float = 0.0
    ripple_period: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.amplitude_sigma >= 0:
            raise ValidationError("amplitude_sigma must be >= 0")
        if not self.ripple_period > 0:
            raise ValidationError("ripple_period must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")

    @property
    def enabled(self):
        return self.amplitude_sigma > 0 or self.ripple_amplitude != 0


NO_NOISE = NoiseSpec()


@dataclass
class SpectrumMap:
    """Signal contrast in ``[0, 1]`` with shape ``(len(x_axis), len(y_axis))``."""

    grid: SweepGrid
    values: np.ndarray
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValidationError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("values must be finite")

    @property
    def x_axis(self):
        return self.grid.x_axis

    @property
    def y_axis(self):
        return self.grid.y_axis

    def column(self, ix):
        return self.values[ix]

    def __eq__(self, other):
        if not isinstance(other, SpectrumMap):
            return NotImplemented
        return (
            np.array_equal(self.grid.x_axis, other.grid.x_axis)
            and np.array_equal(self.grid.y_axis, other.grid.y_axis)
            and self.grid.x_kind == other.grid.x_kind
            and self.grid.y_kind == other.grid.y_kind
            and np.array_equal(self.values, other.values)
            and self.seed == other.seed
            and self.metadata == other.metadata
        )

    # -- serialization -------------------------------------------------

    def to_json(self):
        doc = {
            "x_axis": self.grid.x_axis.tolist(),
            "y_axis": self.grid.y_axis.tolist(),
            "axes": self.grid.metadata,
            "shape": list(self.values.shape),
            "values": self.values.ravel(order="C").tolist(),
            "seed": int(self.seed),
            "metadata": self.metadata,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        grid = SweepGrid(doc["x_axis"], doc["y_axis"], doc["axes"]["x_kind"], doc["axes"]["y_kind"])
        values = np.asarray(doc["values"], dtype=float).reshape(doc["shape"])
        return cls(grid, values, int(doc["seed"]), dict(doc.get("metadata", {})))

    def to_csv(self):
        buf = io.StringIO()
        header = dict(self.grid.metadata)
        header["nx"] = self.values.shape[0]
        header["ny"] = self.values.shape[1]
        header["seed"] = int(self.seed)
        for key, value in self.metadata.items():
            header[f"meta.{key}"] = value
        for key in sorted(header):
            buf.write(f"# {key}={header[key]}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "value"])
        for ix, x in enumerate(self.grid.x_axis):
            xr = repr(float(x))
            for iy, y in enumerate(self.grid.y_axis):
                writer.writerow([xr, repr(float(y)), repr(float(self.values[ix, iy]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        header = {}
        rows = []
        reader_lines = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
            elif line.strip():
                reader_lines.append(line)
        reader = csv.reader(reader_lines)
        if next(reader) != ["x", "y", "value"]:
            raise ValidationError("CSV spectrum must have header x,y,value")
        rows = np.array([[float(v) for v in row] for row in reader])
        nx, ny = int(header["nx"]), int(header["ny"])
        if rows.shape != (nx * ny, 3):
            raise ValidationError("CSV row count does not match nx*ny")
        x_axis = rows[::ny, 0]
        y_axis = rows[:ny, 1]
        grid = SweepGrid(x_axis, y_axis, header["x_kind"], header["y_kind"])
        metadata = {k[5:]: _parse_scalar(v) for k, v in header.items() if k.startswith("meta.")}
        return cls(grid, rows[:, 2].reshape(nx, ny), int(header["seed"]), metadata)


def _parse_scalar(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


# -- engine ---------------------------------------------------------------


def _peak(probe, centre, linewidth):
    hw = 0.5 * linewidth
    return 1.0 / (1.0 + ((probe - centre) / hw) ** 2)


def apply_noise(column, y_axis, ix, noise):
    """Ripple, Gaussian noise and clipping for column ``ix``; deterministic in (seed, ix)."""
    if noise.ripple_amplitude:
        column = column * (1.0 + noise.ripple_amplitude * np.sin(2.0 * np.pi * y_axis / noise.ripple_period))
    if noise.amplitude_sigma > 0:
        rng = np.random.default_rng([int(noise.seed), int(ix)])
        column = column + rng.normal(0.0, noise.amplitude_sigma, size=y_axis.size)
    return np.clip(column, 0.0, 1.0)


def evaluate_map(column_fn, grid, noise=NO_NOISE, threads=1, metadata=None):
    """Build a :class:`SpectrumMap` from ``column_fn(ix, x) -> contrast column``.

    Columns are gathered by index so the result is independent of ``threads``.
    """
    y = grid.y_axis

    def work(ix):
        col = np.asarray(column_fn(ix, grid.x_axis[ix]), dtype=float)
        return apply_noise(col, y, ix, noise)

    indices = range(grid.x_axis.size)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(work, indices))
    else:
        cols = [work(ix) for ix in indices]
    values = np.vstack(cols) if cols else np.zeros(grid.shape)
    return SpectrumMap(grid, values, int(noise.seed), dict(metadata or {}))


def _require_kind(grid, kind):
    if grid.x_kind != kind:
        raise ValidationError(f"grid x_kind must be {kind!r}, got {grid.x_kind!r}")


def simulate_resonator_sweep(device, grid, noise=NO_NOISE, threads=1, mask_cutoff=DEFAULT_FRUSTRATION_CUTOFF):
    """Resonator line versus SQUID flux; columns near frustration are left at baseline."""
    _require_kind(grid, "phi_sq")
    res = device.resonator
    const = device.constants

    def column(ix, phi):
        if abs(math.cos(math.pi * phi / const.phi0)) <= mask_cutoff:
            return np.zeros(grid.y_axis.size)
        f_r = resonator_frequency(phi, res, mask_cutoff, const) / (2.0 * math.pi)
        return _peak(grid.y_axis, f_r, device.resonator_linewidth)

    return evaluate_map(column, grid, noise, threads, {"experiment": "resonator-sweep"})


def simulate_qubit_sweep(device, grid, noise=NO_NOISE, include_resonator_line=True, threads=1):
    """Bare qubit line versus qubit flux, optionally with the flat resonator line."""
    _require_kind(grid, "phi_fq")
    from .model import energy_detuning

    f_r = device.resonator_frequency_hz

    def column(ix, phi):
        eps = energy_detuning(phi, device.qubit, device.constants)
        f_q = qubit_transition_frequency(eps, device.qubit, device.constants)
        col = _peak(grid.y_axis, f_q, device.qubit_linewidth)
        if include_resonator_line:
            col = np.maximum(col, _peak(grid.y_axis, f_r, device.resonator_linewidth))
        return col

    return evaluate_map(column, grid, noise, threads, {"experiment": "qubit-sweep"})


def simulate_two_tone(device, grid, pump_power, mapping, noise=NO_NOISE, resonance_frequency=None, threads=1):
    """Qubit line versus pump frequency at fixed pump power.

    The pump populates the resonator according to its detuning from
    ``resonance_frequency`` (default: the bare resonator frequency at the
    device's SQUID bias).
    """
    _require_kind(grid, "pump_frequency")
    f_res = device.resonator_frequency_hz if resonance_frequency is None else float(resonance_frequency)
    nbar = power_to_mean_photons(pump_power, mapping, grid.x_axis - f_res, device.resonator_linewidth)
    nbar = np.atleast_1d(nbar)

    def column(ix, _pump):
        dist = poisson_weights(float(nbar[ix]))
        return photon_weighted_contrast(device, dist, grid.y_axis, device.qubit_linewidth)

    meta = {"experiment": "two-tone", "pump_power": float(pump_power), "resonance_frequency": f_res}
    return evaluate_map(column, grid, noise, threads, meta)


def simulate_power_sweep(device, powers, probe_grid, mapping, noise=NO_NOISE, threads=1):
    """Qubit line versus on-resonance pump power (``nbar = alpha P``)."""
    grid = SweepGrid(powers, probe_grid, "power", "probe_frequency")
    nbar = power_to_mean_photons(grid.x_axis, mapping, 0.0, device.resonator_linewidth)
    nbar = np.atleast_1d(nbar)

    def column(ix, _p):
        dist = poisson_weights(float(nbar[ix]))
        return photon_weighted_contrast(device, dist, grid.y_axis, device.qubit_linewidth)

    return evaluate_map(column, grid, noise, threads, {"experiment": "power-sweep"})
