"""Logarithmic volume-compliance growth law and curve interpolation plans.

A growth family is a straight line in (ln v, 1/c) space,

    1/c = a ln(v) + b,    a = -1/(c_min ln v0),    b = 1/c_min,

anchored at the starting volume fraction v0 (infinite compliance) and the
fully solid state (v = 1, c = c_min). Inverting for volume gives the
per-iteration update v = v0^(1 - c_min/c), which is the form implemented
here; volume targets are clamped monotone non-decreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mesh_fem

V0_UPPER = 1.0 - 1e-6


class DegenerateCurve(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


class Unreachable(RuntimeError):
    """The requested interpolation target cannot be attained."""


class StalledConvergence(RuntimeError):
    """An interpolation plan stopped making progress before reaching its curve."""


@dataclass(frozen=True)
class GrowthCurve:
    v0: float
    c_min: float
    a: float
    b: float

    def inv_c_at(self, v: float) -> float:
        """Line value a ln(v) + b (the model's 1/c) at volume fraction v."""
        return self.a * math.log(v) + self.b

    def compliance_at(self, v: float) -> float:
        if not (self.v0 < v <= 1.0):
            raise ValueError(f"curve is defined on ({self.v0}, 1], got v={v}")
        if v == 1.0:
            return self.c_min
        return 1.0 / self.inv_c_at(v)

    def volume_at(self, c: float) -> float:
        """Volume fraction on the curve at compliance c >= c_min."""
        c = max(float(c), self.c_min)
        return self.v0 ** (1.0 - self.c_min / c)

    def residual(self, v: float, c: float) -> float:
        """Distance from the point (v, c) to the curve, in 1/c units."""
        return abs(1.0 / c - self.inv_c_at(v))


@dataclass(frozen=True)
class GrowthConstants:
    """Bone-remodelling-side constants, kept for documentation and reporting.

    alpha is the product of the density growth-rate coefficient and the
    time step; beta the integration constant; zeta the stiffness vs
    strain-energy inverse-proportionality constant. They never enter the
    iteration directly: at runtime everything is absorbed into the curve
    constants (a, b). Only the gamma = 1 branch of the stiffness-density
    power law is supported.
    """

    alpha: float
    beta: float
    zeta: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma != 1.0:
            raise ValueError("only the gamma = 1 branch is implemented")


def make_curve(v0: float, c_min: float) -> GrowthCurve:
    if not np.isfinite(v0) or not np.isfinite(c_min):
        raise NonFiniteInput("v0 and c_min must be finite")
    if not (0.0 < v0 < V0_UPPER):
        raise DegenerateCurve(f"v0 must lie in (0, {V0_UPPER}), got {v0}")
    if c_min <= 0.0:
        raise DegenerateCurve(f"c_min must be positive, got {c_min}")
    a = -1.0 / (c_min * math.log(v0))
    b = 1.0 / c_min
    return GrowthCurve(v0, c_min, a, b)


def next_volume(curve: GrowthCurve, c_i: float, v_i: float,
                form: str = "exponential") -> float:
    """Next volume target from current compliance, clamped to [v_i, 1].

    form="exponential" evaluates v0^(1 - c_min/c); form="as_printed" keeps
    the uncorrected linear expression for comparison runs.
    """
    if not (np.isfinite(c_i) and np.isfinite(v_i)):
        raise NonFiniteInput(f"c={c_i}, v={v_i}")
    c = max(float(c_i), curve.c_min)
    if form == "exponential":
        raw = curve.v0 ** (1.0 - curve.c_min / c)
    elif form == "as_printed":
        raw = (1.0 / curve.c_min - 1.0 / c) * curve.c_min * math.log(curve.v0)
    else:
        raise ValueError(f"unknown update form {form!r}")
    return min(max(raw, v_i), 1.0)


def curve_points(curve: GrowthCurve, n: int, eps: float = 1e-6) -> np.ndarray:
    """n samples (v, c) with v log-spaced over (v0*(1+eps), 1]; the last
    sample is the exact solid anchor (1, c_min)."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    lo = curve.v0 * (1.0 + eps)
    if lo >= 1.0:
        raise DegenerateCurve("no sampling room between v0 and 1")
    v = np.exp(np.linspace(math.log(lo), 0.0, n))
    c = 1.0 / (curve.a * np.log(v) + curve.b)
    v[-1] = 1.0
    c[-1] = curve.c_min
    return np.column_stack([v, c])


def solid_compliance(mesh, law, loads) -> float:
    """Compliance of the fully solid domain, aggregated over load cases with
    the same normalized weights the optimization driver reports."""
    loads = list(loads)
    dens = mesh_fem.DensityField.uniform(mesh, 1.0)
    system = mesh_fem.StiffnessSystem(mesh, law, dens)
    wsum = sum(ld.weight for ld in loads)
    total = 0.0
    for load in loads:
        u = system.solve(load)
        c, _ = mesh_fem.compliance(u, mesh, law, dens)
        total += load.weight / wsum * c
    return total


# ---------------------------------------------------------------------------
# Interpolation plans. These are declarative: the optimization driver asks a
# plan for volume targets and for its completion status, keeping this module
# free of solver state.
# ---------------------------------------------------------------------------

TOL_CURVE = 1e-3   # intersection tolerance, in 1/c units
STALL_LIMIT = 50   # consecutive sub-tol iterations before giving up


@dataclass(frozen=True)
class HorizontalJump:
    """Switch growth families once compliance first reaches the limit c_t.

    Volume updates follow the source law until c <= c_t, then the target
    law; the monotone volume clamp holds the volume while compliance keeps
    dropping, so the state descends onto the target curve and rides it. The
    plan is complete when the state lies on the target curve within
    tol_curve.
    """

    source: GrowthCurve
    target: GrowthCurve
    c_t: float
    tol_curve: float = TOL_CURVE

    def __post_init__(self):
        if self.c_t <= self.target.c_min:
            raise Unreachable(
                f"target curve never attains c_t={self.c_t} (c_min={self.target.c_min})")

    def switched(self, c: float) -> bool:
        return c <= self.c_t

    def law(self, c: float) -> GrowthCurve:
        return self.target if self.switched(c) else self.source

    def complete(self, v: float, c: float) -> bool:
        return self.switched(c) and self.target.residual(v, c) <= self.tol_curve


@dataclass(frozen=True)
class VerticalJump:
    """Hold the volume at a threshold v_t until the target curve is reached.

    Volume grows along the source law up to v_t and is then pinned there
    (plain fixed-volume steps); the plan is complete when 1/c is within
    tol_curve of the target curve's value at v_t.
    """

    source: GrowthCurve
    target: GrowthCurve
    v_t: float
    tol_curve: float = TOL_CURVE

    def __post_init__(self):
        lo = max(self.source.v0, self.target.v0)
        if not (lo < self.v_t < 1.0):
            raise ValueError(f"v_t must lie in ({lo}, 1), got {self.v_t}")

    def complete(self, v: float, c: float) -> bool:
        return (v >= self.v_t - 1e-6
                and abs(1.0 / c - self.target.inv_c_at(self.v_t)) <= self.tol_curve)
