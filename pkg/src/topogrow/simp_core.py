"""Optimization driver: OC density updates, convolution filters, schedules.

One iteration follows solve -> compliance -> sensitivities -> filters ->
(periodic) erosion -> OC update toward the schedule's volume target. The
driver is a generator yielding the state after every iteration, so callers
(the CLI archive writer, tests) act as the sink.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import growth, twigcutter
from .mesh_fem import (RHO_FLOOR, DensityField, GridMesh, LoadCase, MaterialLaw,
                       StiffnessSystem, compliance, element_energy_quadratic)


class BracketFailure(RuntimeError):
    """OC bisection could not hit a reachable volume target."""


class NonFiniteCompliance(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    rmin: float = 2.0
    filter_mode: str = "sensitivity"
    move_limit: float = 0.2
    oc_damping: float = 0.5
    tol: float = 0.01
    max_iter: int = 300

    def __post_init__(self):
        if self.rmin < 1.0:
            raise ValueError("rmin must be >= 1 (one element is the finest resolution)")
        if self.filter_mode not in ("sensitivity", "density"):
            raise ValueError(f"unknown filter mode {self.filter_mode!r}")
        if not (0.0 < self.move_limit <= 1.0):
            raise ValueError("move limit must lie in (0, 1]")
        if self.tol <= 0.0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")


@dataclass
class HistoryRecord:
    iteration: int
    v: float
    c: float
    change: float
    erased_count: int = 0
    volume_removed: float = 0.0


@dataclass
class OptimizationState:
    iteration: int
    densities: DensityField
    v_current: float
    c_current: float
    change: float
    status: str
    history: list = field(default_factory=list)
    displacements: list = field(default_factory=list)
    erosion_report: twigcutter.ErosionReport | None = None


# ---------------------------------------------------------------------------
# Cone-weight convolution filter (weights max(0, rmin - dist)).
# ---------------------------------------------------------------------------

class ConeFilter:
    def __init__(self, mesh: GridMesh, rmin: float):
        self.mesh = mesh
        self.rmin = float(rmin)
        self._h = _cone_matrix(mesh, self.rmin)
        self._hs = np.asarray(self._h.sum(axis=1)).ravel()

    def smooth(self, values: np.ndarray) -> np.ndarray:
        """Density-mode smoothing: partition-of-unity weighted average."""
        return self._h @ values / self._hs

    def smooth_sensitivity(self, dc: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Classical density-weighted sensitivity smoothing."""
        return self._h @ (rho * dc) / self._hs / np.maximum(rho, 1e-3)

    def smooth_ratio(self, values: np.ndarray) -> np.ndarray:
        """Chain-rule transform of gradients under density-mode filtering."""
        return self._h @ (values / self._hs)


def _cone_matrix(mesh: GridMesh, rmin: float) -> sp.csr_matrix:
    nelx, nely = mesh.nelx, mesh.nely
    reach = int(np.ceil(rmin)) - 1
    ex = np.repeat(np.arange(nelx), nely)
    ey = np.tile(np.arange(nely), nelx)
    rows, cols, vals = [], [], []
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            w = rmin - np.hypot(dx, dy)
            if w <= 0:
                continue
            jx, jy = ex + dx, ey + dy
            ok = (jx >= 0) & (jx < nelx) & (jy >= 0) & (jy < nely)
            rows.append((ex[ok] * nely + ey[ok]))
            cols.append((jx[ok] * nely + jy[ok]))
            vals.append(np.full(ok.sum(), w))
    n = mesh.n_elements
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()


_FILTER_CACHE: dict = {}


def cone_filter(mesh: GridMesh, rmin: float) -> ConeFilter:
    key = (mesh.nelx, mesh.nely, float(rmin))
    if key not in _FILTER_CACHE:
        _FILTER_CACHE[key] = ConeFilter(mesh, rmin)
    return _FILTER_CACHE[key]


def convolution_filter(values: np.ndarray, mesh: GridMesh, rmin: float,
                       mode: str = "density", densities: np.ndarray | None = None) -> np.ndarray:
    """Functional cone-filter wrapper; mode 'sensitivity' needs densities."""
    filt = cone_filter(mesh, rmin)
    if mode == "density":
        return filt.smooth(np.asarray(values, dtype=float))
    if mode == "sensitivity":
        if densities is None:
            raise ValueError("sensitivity mode needs the density field")
        return filt.smooth_sensitivity(np.asarray(values, dtype=float),
                                       np.asarray(densities, dtype=float))
    raise ValueError(f"unknown filter mode {mode!r}")


# ---------------------------------------------------------------------------
# Sensitivities and the optimality-criteria update.
# ---------------------------------------------------------------------------

def sensitivities(u: np.ndarray, mesh: GridMesh, law: MaterialLaw,
                  densities: DensityField) -> tuple[np.ndarray, np.ndarray]:
    """Compliance and volume gradients for one load case; dc <= 0, dv = 1."""
    q = element_energy_quadratic(u, mesh, law)
    rho = densities.rho_phys
    dc = -law.penal * rho ** (law.penal - 1.0) * (law.e0 - law.emin) * q
    return dc, np.ones(mesh.n_elements)


def oc_update(rho: np.ndarray, dc: np.ndarray, dv: np.ndarray, v_target: float,
              *, move: float = 0.2, damping: float = 0.5, floor: float = RHO_FLOOR,
              phys=None, target_tol: float = 1e-4) -> np.ndarray:
    """One optimality-criteria step toward a volume target.

    Bisects the Lagrange multiplier until the (physical) mean density hits
    v_target within target_tol. Targets outside the move-limited reachable
    band saturate at the nearest bound; that is the normal way multi-step
    schedules approach far targets. BracketFailure only signals a target
    that was reachable but missed.
    """
    if np.any(dc > 1e-12):
        raise ValueError("compliance sensitivities must be non-positive")
    if phys is None:
        phys = lambda a: a
    lo = np.clip(rho - move, floor, 1.0)
    hi = np.clip(rho + move, floor, 1.0)
    ratio = np.maximum(-dc, 0.0) / np.maximum(dv, 1e-30)

    def candidate(lmid: float) -> np.ndarray:
        return np.clip(rho * (ratio / lmid) ** damping, lo, hi)

    mean_hi = float(phys(candidate(1e-300)).mean())
    mean_lo = float(phys(candidate(1e300)).mean())
    if v_target >= mean_hi:
        return candidate(1e-300)
    if v_target <= mean_lo:
        return candidate(1e300)

    l1, l2 = 0.0, 1e9
    while float(phys(candidate(l2)).mean()) > v_target:
        l2 *= 16.0
    for _ in range(200):
        if (l2 - l1) <= 1e-13 * (l1 + l2):
            break
        lmid = 0.5 * (l1 + l2)
        if float(phys(candidate(lmid)).mean()) > v_target:
            l1 = lmid
        else:
            l2 = lmid
    xnew = candidate(0.5 * (l1 + l2))
    achieved = float(phys(xnew).mean())
    if abs(achieved - v_target) > target_tol:
        raise BracketFailure(
            f"volume target {v_target:.6f} missed (achieved {achieved:.6f})")
    return xnew


# ---------------------------------------------------------------------------
# Volume schedules: fixed volume, the two growth laws, interpolation plans.
# ---------------------------------------------------------------------------

class FixedVolumeSchedule:
    mode = "fixed_volume"

    def __init__(self, v_f: float):
        if not (0.0 < v_f <= 1.0):
            raise ValueError("volume fraction must lie in (0, 1]")
        self.v_f = v_f
        self.initial_volume = v_f

    def next_target(self, c: float) -> float:
        return self.v_f

    def check(self, v: float, c: float, change: float, tol: float):
        return "converged" if change <= tol else None


class LogGrowthSchedule:
    """Volume targets from the logarithmic law, monotone non-decreasing."""

    mode = "growth_log"

    def __init__(self, curve: growth.GrowthCurve, v_f: float = 1.0,
                 form: str = "exponential"):
        self.curve = curve
        self.v_f = v_f
        self.form = form
        self.initial_volume = curve.v0
        self._sched = curve.v0

    def next_target(self, c: float) -> float:
        self._sched = growth.next_volume(self.curve, c, self._sched, self.form)
        return min(self._sched, self.v_f)

    def check(self, v: float, c: float, change: float, tol: float):
        if v >= self.v_f - 1e-9:
            return "target_volume"
        if change <= tol:
            return "converged"
        return None


class LinearGrowthSchedule:
    """Constant volume increments from a prescribed start up to the target."""

    mode = "growth_linear"

    def __init__(self, v_f: float, start: float | None = None, step: float = 0.002):
        if not (0.0 < v_f <= 1.0):
            raise ValueError("volume fraction must lie in (0, 1]")
        self.v_f = v_f
        self.step = step
        self.initial_volume = start if start is not None else 0.9 * v_f
        self._sched = self.initial_volume

    def next_target(self, c: float) -> float:
        self._sched = min(self._sched + self.step, self.v_f)
        return self._sched

    def check(self, v: float, c: float, change: float, tol: float):
        if change <= tol and self._sched >= self.v_f:
            return "converged"
        return None


class PlanSchedule:
    """Executes a growth interpolation plan (horizontal or vertical jump)."""

    def __init__(self, plan, start_volume: float, tol: float | None = None):
        self.plan = plan
        self.initial_volume = start_volume
        self._sched = start_volume
        self._stall = 0
        self._last_c = None
        self.mode = ("interpolate_horizontal" if isinstance(plan, growth.HorizontalJump)
                     else "interpolate_vertical")

    def next_target(self, c: float) -> float:
        if isinstance(self.plan, growth.HorizontalJump):
            law = self.plan.law(c)
            self._sched = min(max(self._sched, law.volume_at(c)), 1.0)
        else:
            raw = self.plan.source.volume_at(c)
            self._sched = min(max(self._sched, raw), self.plan.v_t)
        return self._sched

    def check(self, v: float, c: float, change: float, tol: float):
        if self.plan.complete(v, c):
            return "interpolated"
        if self._last_c is not None and abs(c - self._last_c) < tol * max(c, 1e-30):
            self._stall += 1
            if self._stall >= growth.STALL_LIMIT:
                raise growth.StalledConvergence(
                    f"no compliance progress for {growth.STALL_LIMIT} iterations at "
                    f"v={v:.4f}, c={c:.6f}")
        else:
            self._stall = 0
        self._last_c = c
        return None


def normalized_weights(loads) -> list[float]:
    total = sum(ld.weight for ld in loads)
    return [ld.weight / total for ld in loads]


# ---------------------------------------------------------------------------
# The driver.
# ---------------------------------------------------------------------------

def run(mesh: GridMesh, law: MaterialLaw, loads, config: OptimizerConfig,
        schedule, erosion: twigcutter.ErosionSpec | None = None,
        floor: float = RHO_FLOOR, initial_rho: np.ndarray | None = None):
    """Yield an OptimizationState after every iteration until done.

    The final yielded state carries a non-"running" status: "converged",
    "target_volume", "interpolated" or "max_iter".
    """
    loads = list(loads)
    if not loads:
        raise ValueError("need at least one load case")
    weights = normalized_weights(loads)

    filt = cone_filter(mesh, config.rmin)
    if config.filter_mode == "density":
        phys = filt.smooth
    else:
        phys = lambda a: a

    if initial_rho is not None:
        x = np.clip(np.asarray(initial_rho, dtype=float), floor, 1.0)
        if x.size != mesh.n_elements:
            raise ValueError("initial density field does not match mesh")
    else:
        x = np.full(mesh.n_elements, float(np.clip(schedule.initial_volume, floor, 1.0)))
    x_phys = phys(x)

    history: list[HistoryRecord] = []
    for i in range(config.max_iter):
        dens = DensityField(x, x_phys, floor)
        v_solved = dens.volume
        system = StiffnessSystem(mesh, law, dens)
        us, c_total, dc = [], 0.0, np.zeros(mesh.n_elements)
        for ld, w in zip(loads, weights):
            u = system.solve(ld)
            us.append(u)
            c_l, _ = compliance(u, mesh, law, dens)
            dc_l, _ = sensitivities(u, mesh, law, dens)
            c_total += float(w * c_l)
            dc += w * dc_l
        if not np.isfinite(c_total):
            raise NonFiniteCompliance(
                f"iteration {i}: compliance {c_total} with mean density {v_solved:.6f}")
        dv = np.ones(mesh.n_elements)

        if config.filter_mode == "sensitivity":
            dc = filt.smooth_sensitivity(dc, x)
        else:
            dc = filt.smooth_ratio(dc)
            dv = filt.smooth_ratio(dv)

        report = None
        if erosion is not None and erosion.active_at(i):
            eroded, report = twigcutter.apply(dens, mesh, erosion)
            x_phys = eroded.rho_phys
            if report.erased_mask is not None:
                # persist the cut into the design variables so the fringe
                # cannot instantly regrow through the smoothing filter
                x = x.copy()
                x[report.erased_mask] = np.minimum(
                    x[report.erased_mask], np.maximum(erosion.rho_erased, floor))

        v_target = schedule.next_target(c_total)
        xnew = oc_update(x, dc, dv, v_target, move=config.move_limit,
                         damping=config.oc_damping, floor=floor, phys=phys)
        change = float(np.abs(xnew - x).max())
        x, x_phys = xnew, phys(xnew)

        history.append(HistoryRecord(
            i, v_solved, c_total, change,
            report.erased_count if report else 0,
            report.volume_removed if report else 0.0))

        # completion checks see the solved pair so plan residuals are
        # evaluated on a physically consistent (v, c) point
        status = schedule.check(v_solved, c_total, change, config.tol)
        if status is None and i == config.max_iter - 1:
            status = "max_iter"
        state = OptimizationState(i, DensityField(x, x_phys, floor), v_solved,
                                  c_total, change, status or "running", history,
                                  us, report)
        yield state
        if status is not None:
            return
