"""Mutual inductance of thin-wire loops from the Neumann double sum.

Each polygon edge is cut into ``subdivisions_per_segment`` straight filaments
and ``M = mu0/4pi * sum_ij (dl_i . dl_j) / r_ij`` is taken over filament
midpoints, with ``r_ij`` floored at the wire radius.
"""

from dataclasses import dataclass
import json
import math

import numpy as np

from .constants import MU0
from .exceptions import GeometryOverlap, ValidationError

OVERLAP_FRACTION = 0.01
_PREFACTOR = MU0 / (4.0 * math.pi)


@dataclass(frozen=True)
class WireLoop:
    """Closed polygon (vertices in metres) of a wire with radius ``wire_radius``."""

    vertices: tuple
    wire_radius: float
    subdivisions_per_segment: int = 16

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise ValidationError("vertices must be a list of 2D or 3D points")
        if v.shape[1] == 2:
            v = np.column_stack([v, np.zeros(len(v))])
        if len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise ValidationError("a loop needs at least 3 distinct vertices")
        closed = np.vstack([v, v[:1]])
        if np.any(np.linalg.norm(np.diff(closed, axis=0), axis=1) == 0):
            raise ValidationError("loop has a zero-length segment")
        if not self.wire_radius > 0:
            raise ValidationError("wire_radius must be > 0")
        if int(self.subdivisions_per_segment) < 1:
            raise ValidationError("subdivisions_per_segment must be >= 1")
        object.__setattr__(self, "vertices", tuple(map(tuple, closed.tolist())))
        object.__setattr__(self, "subdivisions_per_segment", int(self.subdivisions_per_segment))

    @property
    def points(self):
        """Closed vertex array, first point repeated at the end."""
        return np.asarray(self.vertices)

    @property
    def n_segments(self):
        return len(self.vertices) - 1

    def with_subdivisions(self, k):
        return WireLoop(self.vertices, self.wire_radius, k)

    def transformed(self, rotation=None, translation=None, scale=1.0):
        p = self.points * scale
        if rotation is not None:
            p = p @ np.asarray(rotation).T
        if translation is not None:
            p = p + np.asarray(translation)
        return WireLoop(p, self.wire_radius * scale, self.subdivisions_per_segment)

    def filaments(self):
        """Midpoints, direction vectors and parent segment index of every filament."""
        p = self.points
        k = self.subdivisions_per_segment
        t = (np.arange(k) + 0.5) / k
        start, stop = p[:-1], p[1:]
        d = stop - start
        mids = start[:, None, :] + t[None, :, None] * d[:, None, :]
        dl = np.repeat(d / k, k, axis=0)
        seg = np.repeat(np.arange(len(d)), k)
        return mids.reshape(-1, 3), dl, seg

    def key(self):
        return (self.vertices, self.wire_radius, self.subdivisions_per_segment)


def _pair_sum(mid_a, dl_a, mid_b, dl_b, floor, tile=2048):
    """Canonical-order Neumann sum; returns (sum, n_floored, n_pairs)."""
    total = 0.0
    floored = 0
    for i in range(0, len(mid_a), tile):
        ma, da = mid_a[i : i + tile], dl_a[i : i + tile]
        r = np.linalg.norm(ma[:, None, :] - mid_b[None, :, :], axis=-1)
        small = r < floor
        floored += int(small.sum())
        r = np.where(small, floor, r)
        total += float(np.sum((da @ dl_b.T) / r))
    return total, floored, len(mid_a) * len(mid_b)


def _ordered(loop_a, loop_b):
    return (loop_a, loop_b) if loop_a.key() <= loop_b.key() else (loop_b, loop_a)


def mutual_inductance(loop_a, loop_b, check_overlap=True):
    """Neumann mutual inductance (H) between two loops.

    The pair is put in a canonical order first, so ``M(a, b) == M(b, a)``
    exactly. Raises :class:`GeometryOverlap` when more than 1% of filament
    pairs are closer than the larger wire radius.
    """
    a, b = _ordered(loop_a, loop_b)
    ma, da, _ = a.filaments()
    mb, db, _ = b.filaments()
    floor = max(a.wire_radius, b.wire_radius)
    total, floored, pairs = _pair_sum(ma, da, mb, db, floor)
    if check_overlap and floored > OVERLAP_FRACTION * pairs:
        raise GeometryOverlap(f"{floored} of {pairs} filament pairs lie within the wire radius")
    return _PREFACTOR * total


def segment_mutual_inductance(a0, a1, b0, b1, subdivisions=64, wire_radius=1e-9):
    """Neumann sum between two straight filaments (open wires)."""
    mids, dls = [], []
    for p0, p1 in ((a0, a1), (b0, b1)):
        p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
        t = (np.arange(subdivisions) + 0.5) / subdivisions
        mids.append(p0 + t[:, None] * (p1 - p0))
        dls.append(np.repeat(((p1 - p0) / subdivisions)[None, :], subdivisions, axis=0))
    total, _, _ = _pair_sum(mids[0], dls[0], mids[1], dls[1], wire_radius)
    return _PREFACTOR * total


def parallel_filaments(length, separation):
    """Closed form for two aligned parallel filaments of equal length."""
    l, d = length, separation
    return (MU0 * l / (2 * math.pi)) * (
        math.log((l + math.sqrt(l * l + d * d)) / d) - math.sqrt(1 + (d / l) ** 2) + d / l
    )


@dataclass
class SharedEdgeResult:
    total: float
    shared_contribution: float
    other_contribution: float

    def to_dict(self):
        return {
            "mutual_inductance": self.total,
            "shared_edge_contribution": self.shared_contribution,
            "non_shared_contribution": self.other_contribution,
        }


def _offset_collinear(p0, p1, q0, q1, offset, tol=1e-9):
    """Exact Neumann integral (without mu0/4pi) for two coincident straight wires
    displaced sideways by ``offset``.

    Uses ``int int ds dt / sqrt((s - t)^2 + a^2)`` = combination of
    ``G(z) = z asinh(z/a) - sqrt(z^2 + a^2)`` over endpoint differences.
    """
    p0, p1, q0, q1 = (np.asarray(v, float) for v in (p0, p1, q0, q1))
    axis = p1 - p0
    length = np.linalg.norm(axis)
    e = axis / length
    other = q1 - q0
    cos = float(e @ other) / np.linalg.norm(other)
    for q in (q0, q1):
        rel = q - p0
        if np.linalg.norm(rel - (rel @ e) * e) > tol * length:
            raise ValidationError("shared segments are not collinear")
    if abs(abs(cos) - 1.0) > tol:
        raise ValidationError("shared segments are not parallel")
    a1, a2 = 0.0, length
    b1, b2 = sorted((float((q0 - p0) @ e), float((q1 - p0) @ e)))

    def G(z):
        return z * math.asinh(z / offset) - math.hypot(z, offset)

    value = G(b2 - a1) - G(b1 - a1) - G(b2 - a2) + G(b1 - a2)
    return math.copysign(value, cos)


def shared_edge_estimate(qubit_loop, squid_loop, shared_segments=()):
    """Mutual inductance of two loops that share wire segments.

    ``shared_segments`` lists ``(qubit_segment, squid_segment)`` index pairs
    that coincide geometrically. Each shared pair is treated as two wires
    running side by side one wire radius apart and integrated in closed form;
    all other filament pairs use the ordinary floored Neumann sum, and
    :class:`GeometryOverlap` is raised if more than 1% of those fall inside the
    floor. The shared-edge part is reported separately.
    """
    shared = [(int(i), int(j)) for i, j in shared_segments]
    if not shared:
        m = mutual_inductance(qubit_loop, squid_loop)
        return SharedEdgeResult(m, 0.0, m)
    for i, j in shared:
        if not (0 <= i < qubit_loop.n_segments and 0 <= j < squid_loop.n_segments):
            raise ValidationError(f"shared segment pair {(i, j)} out of range")
    mq, dq, sq = qubit_loop.filaments()
    ms, ds, ss = squid_loop.filaments()
    a = max(qubit_loop.wire_radius, squid_loop.wire_radius)

    r = np.linalg.norm(mq[:, None, :] - ms[None, :, :], axis=-1)
    other = np.ones(r.shape, dtype=bool)
    for i, j in shared:
        other &= ~((sq[:, None] == i) & (ss[None, :] == j))
    small = other & (r < a)
    n_other = int(other.sum())
    if n_other and small.sum() > OVERLAP_FRACTION * n_other:
        raise GeometryOverlap(
            f"{int(small.sum())} of {n_other} non-shared filament pairs lie within the wire radius"
        )
    dots = dq @ ds.T
    other_sum = float(np.sum(np.where(other, dots / np.maximum(r, a), 0.0)))

    qp, sp = qubit_loop.points, squid_loop.points
    shared_sum = sum(_offset_collinear(qp[i], qp[i + 1], sp[j], sp[j + 1], a) for i, j in shared)
    ms_, mo_ = _PREFACTOR * shared_sum, _PREFACTOR * other_sum
    return SharedEdgeResult(ms_ + mo_, ms_, mo_)


def convergence_report(qubit_loop, squid_loop, shared_segments=(), levels=(8, 16, 32, 64)):
    """Estimates at increasing subdivision counts and successive differences."""
    values = []
    for k in levels:
        res = shared_edge_estimate(
            qubit_loop.with_subdivisions(k), squid_loop.with_subdivisions(k), shared_segments
        )
        values.append(res.total)
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    return {"subdivisions": list(levels), "mutual_inductance": values, "successive_differences": diffs}


# -- geometry files -------------------------------------------------------


def load_geometry(path_or_text):
    """Parse a geometry JSON document.

    Schema::

        {"wire_radius": 5e-8, "subdivisions": 32,
         "loops": {"qubit": [[x, y, z], ...], "squid": [[x, y, z], ...]},
         "shared_segments": [[qubit_segment, squid_segment], ...]}

    Returns ``(qubit_loop, squid_loop, shared_segments)``.
    """
    text = path_or_text
    if not str(path_or_text).lstrip().startswith("{"):
        with open(path_or_text) as fh:
            text = fh.read()
    doc = json.loads(text)
    unknown = set(doc) - {"wire_radius", "subdivisions", "loops", "shared_segments", "description"}
    if unknown:
        raise ValidationError(f"unknown geometry keys: {sorted(unknown)}")
    radius = float(doc["wire_radius"])
    k = int(doc.get("subdivisions", 32))
    loops = doc["loops"]
    qubit = WireLoop(loops["qubit"], radius, k)
    squid = WireLoop(loops["squid"], radius, k)
    shared = [tuple(p) for p in doc.get("shared_segments", [])]
    return qubit, squid, shared


def geometry_report(qubit_loop, squid_loop, shared_segments=(), levels=(8, 16, 32, 64)):
    res = shared_edge_estimate(qubit_loop, squid_loop, shared_segments)
    out = res.to_dict()
    out["unit"] = "H"
    out["subdivisions"] = qubit_loop.subdivisions_per_segment
    out["convergence"] = convergence_report(qubit_loop, squid_loop, shared_segments, levels)
    return out
