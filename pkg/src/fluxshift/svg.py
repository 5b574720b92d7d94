"""Minimal SVG heatmap writer for spectrum maps."""

from xml.sax.saxutils import escape

import numpy as np

# dark blue -> teal -> yellow
_STOPS = np.array([[0.0, 13, 8, 135], [0.5, 33, 145, 140], [1.0, 253, 231, 37]])

AXIS_LABELS = {
    "phi_sq": ("SQUID flux", "Phi0", 1.0),
    "phi_fq": ("qubit flux", "Phi0", 1.0),
    "pump_frequency": ("pump frequency", "GHz", 1e-9),
    "power": ("pump power", "mW", 1e3),
    "probe_frequency": ("probe frequency", "GHz", 1e-9),
}


def _colour(v):
    v = float(np.clip(v, 0.0, 1.0))
    rgb = [int(round(np.interp(v, _STOPS[:, 0], _STOPS[:, k]))) for k in (1, 2, 3)]
    return "#%02x%02x%02x" % tuple(rgb)


def _block_mean(a, nx, ny):
    """Downsample ``a`` to at most (nx, ny) cells by block averaging."""
    fx = max(1, int(np.ceil(a.shape[0] / nx)))
    fy = max(1, int(np.ceil(a.shape[1] / ny)))
    px = (-a.shape[0]) % fx
    py = (-a.shape[1]) % fy
    padded = np.pad(a, ((0, px), (0, py)), mode="edge")
    return padded.reshape(padded.shape[0] // fx, fx, padded.shape[1] // fy, fy).mean(axis=(1, 3))


def heatmap_svg(spectrum, title="", max_cells=(200, 200), width=640, height=480):
    """Render ``spectrum`` (x horizontal, y vertical) as an SVG string."""
    from .constants import PHI0

    vals = _block_mean(spectrum.values, *max_cells)
    vmax = float(vals.max()) or 1.0
    vals = vals / vmax
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom
    cw, ch = pw / vals.shape[0], ph / vals.shape[1]
    y_desc = spectrum.y_axis[0] > spectrum.y_axis[-1]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" shape-rendering="crispEdges">',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for i in range(vals.shape[0]):
        for j in range(vals.shape[1]):
            row = j if y_desc else vals.shape[1] - 1 - j
            out.append(
                f'<rect x="{left + i * cw:.2f}" y="{top + row * ch:.2f}" width="{cw + 0.05:.2f}" '
                f'height="{ch + 0.05:.2f}" fill="{_colour(vals[i, j])}"/>'
            )

    def label(kind, values):
        name, unit, scale = AXIS_LABELS[kind]
        if unit == "Phi0":
            values = np.asarray(values) / PHI0
        else:
            values = np.asarray(values) * scale
        return name, unit, values

    xname, xunit, xv = label(spectrum.grid.x_kind, spectrum.x_axis)
    yname, yunit, yv = label(spectrum.grid.y_kind, spectrum.y_axis)
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for frac in (0.0, 0.5, 1.0):
        xval = xv[0] + frac * (xv[-1] - xv[0])
        out.append(
            f'<text x="{left + frac * pw:.1f}" y="{top + ph + 16}" text-anchor="middle" font-size="11">{xval:.4g}</text>'
        )
        yval = min(yv[0], yv[-1]) + frac * abs(yv[-1] - yv[0])
        out.append(
            f'<text x="{left - 6}" y="{top + ph - frac * ph + 4:.1f}" text-anchor="end" font-size="11">{yval:.4g}</text>'
        )
    out.append(
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">'
        f"{escape(xname)} ({escape(xunit)})</text>"
    )
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(yname)} ({escape(yunit)})</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
