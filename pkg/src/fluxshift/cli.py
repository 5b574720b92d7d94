"""Command-line entry point.

Exit status: 0 on success, 1 on validation/configuration errors, 2 on
numerical failures.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import parse_config, parse_flux
from .constants import GHZ, MHZ, MILLI, PHI0, PICO, NANO
from .exceptions import NumericalError, ValidationError
from .model import coupling_strength

SIM_COMMANDS = ("resonator-sweep", "qubit-sweep", "two-tone", "power-sweep")
DEFAULT_CONFIG = {
    "resonator-sweep": "resonator_sweep",
    "qubit-sweep": "qubit_sweep",
    "two-tone": "two_tone_below",
    "power-sweep": "power_sweep",
    "coupling-chain": "device",
    "fit": "device",
    "mutual-inductance": "device",
}
FORMATS = ("csv", "json", "svg")


def _formats(text):
    fmts = [f.strip() for f in text.split(",") if f.strip()]
    bad = [f for f in fmts if f not in FORMATS]
    if bad or not fmts:
        raise argparse.ArgumentTypeError(f"format must be a comma list of {', '.join(FORMATS)}")
    return fmts


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="fluxshift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=True):
        p.add_argument("--config", help="config JSON path or bundled name (default depends on command)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=_seed, help="noise seed (overrides config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        if formats:
            p.add_argument("--format", type=_formats, default=["json"], help="csv, json, svg or a comma list")

    for name in SIM_COMMANDS:
        p = sub.add_parser(name, help=f"simulate a {name} map")
        common(p)
        if name != "resonator-sweep":
            p.add_argument("--bias", help="qubit flux from the sweet spot, e.g. -1.05mPhi0")
        if name == "two-tone":
            p.add_argument("--pump-power", type=float, help="pump power in mW")

    p = sub.add_parser("fit", help="extract a ridge from a map and fit a model")
    common(p, formats=False)
    p.add_argument("--kind", choices=("qubit", "resonator", "power"), required=True)
    p.add_argument("--input", required=True, help="spectrum map (.json or .csv)")
    p.add_argument("--window", help="ridge window 'low,high' in GHz")

    p = sub.add_parser("mutual-inductance", help="Neumann mutual inductance of a loop geometry")
    common(p, formats=False)
    p.add_argument("--geometry", help="geometry JSON path or bundled geometry name")

    p = sub.add_parser("coupling-chain", help="print g = 2 hbar slope M I_p with intermediates")
    common(p, formats=False)
    return parser


def _write(out_dir, stem, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, stem)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _overrides(args):
    ov = {}
    if getattr(args, "seed", None) is not None:
        ov["noise.seed"] = args.seed
    if getattr(args, "bias", None):
        ov["qubit.flux_bias"] = parse_flux(args.bias) / (MILLI * PHI0)
    if getattr(args, "pump_power", None) is not None:
        ov["drive.power"] = args.pump_power
    return ov


def _simulate(args, cfg):
    from . import spectroscopy as sp
    from .svg import heatmap_svg

    x, y = cfg.sweep_axes(args.command)
    dev, noise, threads = cfg.device, cfg.noise, max(1, args.threads)
    if args.command == "resonator-sweep":
        result = sp.simulate_resonator_sweep(dev, sp.SweepGrid(x, y, "phi_sq"), noise, threads=threads)
    elif args.command == "qubit-sweep":
        result = sp.simulate_qubit_sweep(dev, sp.SweepGrid(x, y, "phi_fq"), noise, threads=threads)
    elif args.command == "two-tone":
        result = sp.simulate_two_tone(
            dev,
            sp.SweepGrid(x, y, "pump_frequency"),
            cfg.pump_power,
            cfg.mapping,
            noise,
            resonance_frequency=cfg.resonance_frequency,
            threads=threads,
        )
    else:
        result = sp.simulate_power_sweep(dev, x, y, cfg.mapping, noise, threads=threads)
    result.metadata["qubit_bias_mphi0"] = dev.qubit_bias / (MILLI * PHI0)
    stem = args.command.replace("-", "_")
    written = []
    for fmt in args.format:
        if fmt == "json":
            text = result.to_json()
        elif fmt == "csv":
            text = result.to_csv()
        else:
            text = heatmap_svg(result, title=f"{args.command} (bias {dev.qubit_bias / (MILLI * PHI0):+.3f} mPhi0)")
        written.append(_write(args.out, f"{stem}.{fmt}", text))
    for path in written:
        print(f"wrote {path}")
    return 0


def _load_map(path):
    from .spectroscopy import SpectrumMap

    with open(path) as fh:
        text = fh.read()
    return SpectrumMap.from_csv(text) if path.endswith(".csv") else SpectrumMap.from_json(text)


def _fit(args, cfg):
    from . import fitting

    spectrum = _load_map(args.input)
    window = cfg.fit["window"]
    if args.window:
        try:
            lo, hi = (float(v) * GHZ for v in args.window.split(","))
        except ValueError:
            raise ValidationError("--window must be 'low,high' in GHz") from None
        window = (lo, hi)
    trace = fitting.extract_ridge(spectrum, window, cfg.fit["threshold"])
    if len(trace) == 0:
        raise NumericalError("no ridge points found in the map")
    dev = cfg.device
    if args.kind == "qubit":
        result = fitting.fit_qubit_spectrum(trace, dev.qubit)
    elif args.kind == "resonator":
        result = fitting.fit_resonator_spectrum(trace, dev.resonator, operating_point=dev.phi_sq)
    else:
        fixed = {"gap_delta": dev.qubit.gap_delta, "epsilon": dev.epsilon, "g": dev.g}
        result = fitting.fit_power_dependence(
            trace, fixed, convention=cfg.fit["convention"], power_cutoff=cfg.fit["power_cutoff"]
        )
    result.extras["ridge_points"] = len(trace)
    result.extras["dropped_columns"] = len(trace.dropped)
    path = _write(args.out, f"fit_{args.kind}.json", result.to_json() + "\n")
    for name, value in result.parameters.items():
        err = result.uncertainties[name]
        print(f"{name} = {value:.9g} +/- {err:.3g} {result.units.get(name, '')}")
    print(f"converged={result.converged} iterations={result.iterations} residual_norm={result.residual_norm:.6g}")
    print(f"wrote {path}")
    return 0


def _mutual(args, cfg):
    from .config import resolve_geometry_path
    from .inductance import geometry_report, load_geometry

    ref = args.geometry or cfg.geometry or "qubit_squid"
    qubit, squid, shared = load_geometry(resolve_geometry_path(ref))
    report = geometry_report(qubit, squid, shared)
    print(f"M = {report['mutual_inductance'] / PICO:.4f} pH")
    print(f"  shared-edge part   = {report['shared_edge_contribution'] / PICO:.4f} pH")
    print(f"  non-shared part    = {report['non_shared_contribution'] / PICO:.4f} pH")
    for k, m in zip(report["convergence"]["subdivisions"], report["convergence"]["mutual_inductance"]):
        print(f"  subdivisions {k:4d}: {m / PICO:.6f} pH")
    path = _write(args.out, "mutual_inductance.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
    return 0


def _coupling_chain(args, cfg):
    dev = cfg.device
    c, q, const = dev.coupling, dev.qubit, dev.constants
    g = coupling_strength(c, q, const)
    slope_ghz = c.slope_at_bias * PHI0 / (2 * math.pi) / GHZ
    lines = [
        f"M          = {c.mutual_inductance / PICO:.4f} pH",
        f"I_p        = {q.persistent_current / NANO:.4f} nA",
        f"dw_r/dPhi  = 2pi x {slope_ghz:.4f} GHz/Phi0 = {c.slope_at_bias:.6e} rad/s/Wb",
        f"flux M*I_p = {c.mutual_inductance * q.persistent_current / PHI0 * 1e3:.6f} mPhi0",
        f"g = 2 hbar (dw_r/dPhi) M I_p = {g:.6e} J",
        f"g/h        = {g / const.h / MHZ:.4f} MHz",
    ]
    print("\n".join(lines))
    report = {
        "mutual_inductance": c.mutual_inductance,
        "persistent_current": q.persistent_current,
        "slope_at_bias": c.slope_at_bias,
        "g": g,
        "g_over_h_hz": g / const.h,
    }
    if args.out and args.out != ".":
        _write(args.out, "coupling_chain.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def _attach_flux_values(argv):
    """Rewrite ``--bias -1.05mPhi0`` as ``--bias=-1.05mPhi0``.

    argparse would otherwise read a negative flux string as an option.
    """
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--bias":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(_attach_flux_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        cfg = parse_config(args.config or DEFAULT_CONFIG[args.command], _overrides(args))
        if args.command in SIM_COMMANDS:
            return _simulate(args, cfg)
        if args.command == "fit":
            return _fit(args, cfg)
        if args.command == "mutual-inductance":
            return _mutual(args, cfg)
        return _coupling_chain(args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
