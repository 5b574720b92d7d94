"""Device configuration files in engineering units.

Configs are JSON. Every numeric key has a fixed unit (see ``SCHEMA``) and is
converted to SI exactly once here. Unknown keys are rejected. A config may
name a bundled base config with ``"extends": "<name>"``; sections are merged
key by key.
"""

from dataclasses import dataclass, field
from importlib import resources
import json
import math
import os

from .constants import FEMTO, GHZ, MHZ, MICRO, MILLI, NANO, PHI0, PICO, H
from .exceptions import ConfigError, ValidationError
from .model import resonator_slope
from .params import CouplingParams, DeviceParams, FluxQubitParams, ResonatorParams
from .photon import DriveMapping
from .spectroscopy import NoiseSpec

# section -> key -> (unit label, SI factor or None for non-numeric, required)
SCHEMA = {
    "resonator": {
        "inductance_l": ("pH", PICO, True),
        "capacitance_c": ("fF", FEMTO, True),
        "squid_critical_current": ("uA", MICRO, True),
        "flux_bias": ("Phi0", PHI0, True),
        "linewidth": ("MHz", MHZ, False),
    },
    "qubit": {
        "gap_delta": ("GHz", GHZ * H, True),
        "persistent_current": ("nA", NANO, True),
        "lobe_index": ("odd integer", None, False),
        "flux_bias": ("mPhi0 from the sweet spot", MILLI * PHI0, False),
        "linewidth": ("MHz", MHZ, False),
    },
    "coupling": {
        "mutual_inductance": ("pH", PICO, False),
        "geometry": ("path or bundled geometry name", None, False),
        "slope": ("GHz/Phi0", 2 * math.pi * GHZ / PHI0, False),
    },
    "drive": {
        "power_to_photons": ("photons/mW", 1.0 / MILLI, False),
        "power": ("mW", MILLI, False),
        "resonance_frequency": ("GHz", GHZ, False),
    },
    "noise": {
        "amplitude_sigma": ("contrast", 1.0, False),
        "ripple_amplitude": ("fraction", 1.0, False),
        "ripple_period": ("MHz", MHZ, False),
        "seed": ("unsigned 64-bit integer", None, False),
    },
    "sweep": {
        "x_start": ("command-dependent", None, False),
        "x_stop": ("command-dependent", None, False),
        "x_points": ("count", None, False),
        "y_start": ("GHz", GHZ, False),
        "y_stop": ("GHz", GHZ, False),
        "y_points": ("count", None, False),
    },
    "fit": {
        "window": ("[GHz, GHz]", None, False),
        "threshold": ("contrast", 1.0, False),
        "power_cutoff": ("mW", MILLI, False),
        "convention": ("'N+1/2' or 'N'", None, False),
    },
}

TOP_LEVEL = set(SCHEMA) | {"extends", "description"}

# x-axis unit per sweep command
SWEEP_X_UNITS = {
    "resonator-sweep": ("Phi0", PHI0),
    "qubit-sweep": ("mPhi0 from the sweet spot", MILLI * PHI0),
    "two-tone": ("GHz", GHZ),
    "power-sweep": ("mW", MILLI),
}

DEFAULTS = {
    ("resonator", "linewidth"): 5.0,
    ("qubit", "lobe_index"): -3,
    ("qubit", "flux_bias"): 0.0,
    ("qubit", "linewidth"): 20.0,
    ("drive", "power_to_photons"): 0.0,
    ("drive", "power"): 0.0,
    ("noise", "amplitude_sigma"): 0.0,
    ("noise", "ripple_amplitude"): 0.0,
    ("noise", "ripple_period"): 100.0,
    ("noise", "seed"): 0,
    ("fit", "threshold"): 0.05,
    ("fit", "power_cutoff"): 0.8,
    ("fit", "convention"): "N+1/2",
}


def bundled_names():
    root = resources.files("fluxshift") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json") and not p.name.startswith("geometry_"))


def _read_bundled(name, key="extends"):
    path = resources.files("fluxshift") / "data" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(key, f"no config file or bundled config named {name!r}")
    return json.loads(path.read_text())


def resolve_geometry_path(ref, base_dir=None):
    """A geometry reference is a file path or the name of a bundled geometry."""
    if base_dir and not os.path.isabs(ref) and os.path.exists(os.path.join(base_dir, ref)):
        return os.path.join(base_dir, ref)
    if os.path.exists(ref):
        return ref
    path = resources.files("fluxshift") / "data" / f"geometry_{ref}.json"
    if path.is_file():
        return str(path)
    raise ConfigError("coupling.geometry", f"geometry file {ref!r} not found")


def _merge(base, over):
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    return out


def load_raw(source):
    """Load a config from a path, a bundled name, or a dict; resolve ``extends``."""
    base_dir = None
    if isinstance(source, dict):
        doc = source
    elif os.path.exists(str(source)):
        base_dir = os.path.dirname(os.path.abspath(source))
        with open(source) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    else:
        doc = _read_bundled(str(source), key="config")
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    seen = set()
    while "extends" in doc:
        name = doc["extends"]
        if name in seen:
            raise ConfigError("extends", f"cyclic extends {name!r}")
        seen.add(name)
        rest = {k: v for k, v in doc.items() if k != "extends"}
        doc = _merge(_read_bundled(name), rest)
    doc["_base_dir"] = base_dir
    return doc


def _number(section, key, value, unit):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{section}.{key}", f"expected a finite number, got {value!r}", unit)
    return float(value)


def _validate_keys(doc):
    for top in doc:
        if top.startswith("_"):
            continue
        if top not in TOP_LEVEL:
            raise ConfigError(top, "unknown top-level key")
        if top in SCHEMA:
            if not isinstance(doc[top], dict):
                raise ConfigError(top, "expected a JSON object")
            for key in doc[top]:
                if key not in SCHEMA[top]:
                    raise ConfigError(f"{top}.{key}", "unknown key")


def _get(doc, section, key):
    unit, factor, required = SCHEMA[section][key]
    sec = doc.get(section, {})
    # null clears a value inherited through "extends"
    if sec.get(key) is None:
        if (section, key) in DEFAULTS:
            value = DEFAULTS[(section, key)]
        elif required:
            raise ConfigError(f"{section}.{key}", "missing required value", unit)
        else:
            return None
    else:
        value = sec[key]
    if factor is None:
        return value
    return _number(section, key, value, unit) * factor


@dataclass
class DeviceConfig:
    """Parsed config: SI device parameters plus drive, noise, sweep and fit settings."""

    device: DeviceParams
    mapping: DriveMapping
    pump_power: float
    resonance_frequency: float
    noise: NoiseSpec
    sweep: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    geometry: str = None
    raw: dict = field(default_factory=dict, repr=False)

    def sweep_axes(self, command):
        """x and y axes (SI) for a sweep command from the ``sweep`` section."""
        sw = self.sweep
        for key in ("x_start", "x_stop", "x_points", "y_start", "y_stop", "y_points"):
            if sw.get(key) is None:
                unit = SWEEP_X_UNITS[command][0] if key.startswith("x_") and key != "x_points" else None
                raise ConfigError(f"sweep.{key}", "missing required value", unit)
        import numpy as np

        unit, factor = SWEEP_X_UNITS[command]
        nx, ny = _count("x_points", sw["x_points"]), _count("y_points", sw["y_points"])
        x0 = _number("sweep", "x_start", sw["x_start"], unit) * factor
        x1 = _number("sweep", "x_stop", sw["x_stop"], unit) * factor
        if command == "qubit-sweep":
            shift = self.device.qubit.sweet_spot(self.device.constants)
            x0, x1 = x0 + shift, x1 + shift
        x = np.linspace(x0, x1, nx)
        y = np.linspace(sw["y_start"], sw["y_stop"], ny)
        return x, y


def _count(key, value):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"sweep.{key}", f"expected a positive integer, got {value!r}", "count")
    return value


def parse_config(source, overrides=None):
    """Parse ``source`` into a :class:`DeviceConfig`.

    ``overrides`` is a dict of ``"section.key": value`` in config units applied
    before validation.
    """
    doc = load_raw(source)
    base_dir = doc.pop("_base_dir", None)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        doc.setdefault(section, {})
        doc[section] = dict(doc[section])
        doc[section][key] = value
    _validate_keys(doc)

    try:
        res = ResonatorParams.from_lc(
            _get(doc, "resonator", "inductance_l"),
            _get(doc, "resonator", "capacitance_c"),
            _get(doc, "resonator", "squid_critical_current"),
        )
    except ValidationError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("resonator", str(exc)) from None
    phi_sq = _get(doc, "resonator", "flux_bias")

    lobe = _get(doc, "qubit", "lobe_index")
    if isinstance(lobe, bool) or not isinstance(lobe, int) or lobe % 2 == 0:
        raise ConfigError("qubit.lobe_index", f"expected an odd integer, got {lobe!r}")
    try:
        qubit = FluxQubitParams(_get(doc, "qubit", "gap_delta"), _get(doc, "qubit", "persistent_current"), lobe)
    except ValidationError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("qubit", str(exc)) from None

    geometry = None
    m = _get(doc, "coupling", "mutual_inductance")
    geo_ref = _get(doc, "coupling", "geometry")
    if geo_ref is not None:
        geometry = resolve_geometry_path(str(geo_ref), base_dir)
    if m is None:
        if geometry is None:
            raise ConfigError("coupling.mutual_inductance", "missing: give a value or coupling.geometry", "pH")
        from .inductance import load_geometry, shared_edge_estimate

        m = shared_edge_estimate(*load_geometry(geometry)).total
    slope = _get(doc, "coupling", "slope")
    if slope is None:
        slope = resonator_slope(phi_sq, res)
    try:
        coupling = CouplingParams(m, slope)
        device = DeviceParams.with_bias(
            res,
            qubit,
            coupling,
            phi_sq,
            _get(doc, "qubit", "flux_bias"),
            resonator_linewidth=_get(doc, "resonator", "linewidth"),
            qubit_linewidth=_get(doc, "qubit", "linewidth"),
        )
        mapping = DriveMapping(_get(doc, "drive", "power_to_photons"))
        seed = _get(doc, "noise", "seed")
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError("noise.seed", f"expected an integer, got {seed!r}", "unsigned 64-bit integer")
        noise = NoiseSpec(
            _get(doc, "noise", "amplitude_sigma"),
            _get(doc, "noise", "ripple_amplitude"),
            _get(doc, "noise", "ripple_period"),
            seed,
        )
    except ValidationError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("config", str(exc)) from None

    res_f = _get(doc, "drive", "resonance_frequency")
    sweep = dict(doc.get("sweep", {}))
    if "y_start" in sweep:
        sweep["y_start"] = _get(doc, "sweep", "y_start")
    if "y_stop" in sweep:
        sweep["y_stop"] = _get(doc, "sweep", "y_stop")
    fit = {
        "threshold": _get(doc, "fit", "threshold"),
        "power_cutoff": _get(doc, "fit", "power_cutoff"),
        "convention": _get(doc, "fit", "convention"),
        "window": None,
    }
    win = doc.get("fit", {}).get("window")
    if win is not None:
        if not (isinstance(win, list) and len(win) == 2):
            raise ConfigError("fit.window", "expected [low, high]", "GHz")
        fit["window"] = (
            _number("fit", "window", win[0], "GHz") * GHZ,
            _number("fit", "window", win[1], "GHz") * GHZ,
        )
    if fit["convention"] not in ("N+1/2", "N"):
        raise ConfigError("fit.convention", "expected 'N+1/2' or 'N'")
    return DeviceConfig(
        device,
        mapping,
        _get(doc, "drive", "power"),
        device.resonator_frequency_hz if res_f is None else res_f,
        noise,
        sweep,
        fit,
        geometry,
        doc,
    )


def parse_flux(text):
    """Parse a flux string like ``-1.05mPhi0`` or ``0.3Phi0`` into Wb."""
    s = str(text).strip()
    for suffix, factor in (("mPhi0", MILLI * PHI0), ("Phi0", PHI0)):
        if s.endswith(suffix):
            try:
                return float(s[: -len(suffix)]) * factor
            except ValueError:
                break
    raise ConfigError("--bias", f"cannot parse flux {text!r}", "mPhi0 or Phi0 suffix")
