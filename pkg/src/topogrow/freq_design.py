"""Normalized frequency queries over the growth design space.

For a single isotropic material, volume fraction stands in for mass and the
inverse compliance under the run's (unit) load pattern for stiffness, so a
single-dof estimate of the natural frequency needs no eigenvalue solve.
All quantities are normalized by the solid block: k_norm = c_min/c,
v_norm = v, f_norm = sqrt(k_norm/v_norm). The 1/(2*pi) factor cancels.

Note f_norm may exceed 1 for families started from small v0 (light but
relatively stiff states); the anchored identity f^2 v = k is the contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import math
import numpy as np

from .growth import GrowthCurve, curve_points


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class FreqPoint:
    v_norm: float
    k_norm: float
    f_norm: float


@dataclass(frozen=True)
class BandGap:
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not (0.0 < self.f_lo < self.f_hi):
            raise ValueError("need 0 < f_lo < f_hi")

    def contains(self, f: float) -> bool:
        return self.f_lo <= f <= self.f_hi


def freq_point(v: float, c: float, c_min: float) -> FreqPoint:
    if not (0.0 < v <= 1.0):
        raise DomainError(f"volume fraction {v} outside (0, 1]")
    if c < c_min:
        raise DomainError(f"compliance {c} below the solid limit {c_min}")
    k = c_min / c
    return FreqPoint(v, k, math.sqrt(k / v))


def curve_freq_points(curve: GrowthCurve, n: int = 1024) -> list[FreqPoint]:
    return [freq_point(v, c, curve.c_min) for v, c in curve_points(curve, n)]


def band_segments(points, gap: BandGap, mode: str = "avoid"):
    """Contiguous v-intervals where the frequency is outside (avoid) or
    inside (target) the gap, over sampled (v, f) points sorted by v.
    Interval endpoints between samples come from linear interpolation.
    An empty list is a valid result."""
    if mode not in ("avoid", "target"):
        raise ValueError(f"unknown mode {mode!r}")
    pts = sorted((float(v), float(f)) for v, f in points)
    if len(pts) < 2:
        raise ValueError("need at least two samples")

    def keep(f: float) -> bool:
        inside = gap.contains(f)
        return not inside if mode == "avoid" else inside

    def crossing(v1, f1, v2, f2):
        # v where f(v) crosses the gap boundary it straddles, linearized
        for bound in (gap.f_lo, gap.f_hi):
            if (f1 - bound) * (f2 - bound) <= 0.0 and f1 != f2:
                return v1 + (bound - f1) * (v2 - v1) / (f2 - f1)
        return 0.5 * (v1 + v2)

    segments = []
    start = pts[0][0] if keep(pts[0][1]) else None
    for (v1, f1), (v2, f2) in zip(pts, pts[1:]):
        k1, k2 = keep(f1), keep(f2)
        if k1 == k2:
            continue
        vx = crossing(v1, f1, v2, f2)
        if k1:
            segments.append((start, vx))
            start = None
        else:
            start = vx
    if start is not None:
        segments.append((start, pts[-1][0]))
    return segments


def band_query(curves, gap: BandGap, mode: str = "avoid", samples: int = 2048):
    """Feasible (v0, v-range) segments per curve.

    curves is an iterable of GrowthCurve or of (label, GrowthCurve); the
    result maps label (v0 when unlabeled) -> list of (v_lo, v_hi).
    """
    out = {}
    for item in curves:
        label, curve = item if isinstance(item, tuple) else (None, item)
        if label is None:
            label = curve.v0
        pts = [(p.v_norm, p.f_norm) for p in curve_freq_points(curve, samples)]
        out[label] = band_segments(pts, gap, mode)
    return out
