"""Minimum-thickness erosion filter.

Scans every material element in eight grid directions and measures how far
the surrounding sub-threshold run extends in each one. When the runs of an
opposite pair add up to at least the target diameter 2r, the strut passing
through that element is thinner than the prescribed minimum along that axis,
and the immediately adjacent sub-threshold cells on both sides are voided so
the nearby fringe cannot regrow. Decisions are taken against the input
snapshot, so the result is independent of scan order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh_fem import DensityField, GridMesh

# direction senses 1..8: east, north-east, north, north-west, west,
# south-west, south, south-east (y up); opposite of d is d+4 (mod 8)
STEPS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
OPPOSITE_PAIRS = ((0, 4), (1, 5), (2, 6), (3, 7))

ALL_DIRECTIONS = 0xFF
HORIZONTAL = 0b00010001       # l1 + l5
VERTICAL = 0b01000100         # l3 + l7
ORTHOGONAL = HORIZONTAL | VERTICAL
DIAGONAL = ALL_DIRECTIONS ^ ORTHOGONAL


@dataclass(frozen=True)
class ErosionSpec:
    radius: int
    threshold_hi: float = 0.8
    rho_erased: float = 0.001
    directions: int = ALL_DIRECTIONS
    cadence: int = 10
    activation_iter: int = 30
    euclidean_diagonals: bool = False

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("erosion radius must be >= 1")
        if not (0.0 < self.rho_erased < self.threshold_hi <= 1.0):
            raise ValueError("need 0 < rho_erased < threshold_hi <= 1")
        if not (0 < self.directions <= ALL_DIRECTIONS):
            raise ValueError("direction mask must enable at least one pair")
        for d, opp in OPPOSITE_PAIRS:
            if bool(self.directions >> d & 1) != bool(self.directions >> opp & 1):
                raise ValueError("direction mask must enable opposite senses together")
        if self.cadence < 1 or self.activation_iter < 0:
            raise ValueError("cadence must be >= 1 and activation_iter >= 0")

    def active_at(self, iteration: int) -> bool:
        return (iteration >= self.activation_iter
                and (iteration - self.activation_iter) % self.cadence == 0)


@dataclass
class ErosionReport:
    erased_count: int = 0
    volume_removed: float = 0.0
    sense_counts: tuple = (0,) * 8
    degenerate_radius: bool = False
    erased_mask: np.ndarray | None = None  # flat bool, element order


def diagonal_step(mesh: GridMesh, e: tuple[int, int], sense: int):
    """Advance one element from grid cell e=(ex,ey) along sense l1..l8.

    Diagonal senses move one element in both axes per step. Returns the
    neighbouring cell, or None when the step leaves the domain.
    """
    if not 1 <= sense <= 8:
        raise ValueError("sense must be in 1..8")
    sx, sy = STEPS[sense - 1]
    px, py = e[0] + sx, e[1] + sy
    if 0 <= px < mesh.nelx and 0 <= py < mesh.nely:
        return (px, py)
    return None


def _shift(grid: np.ndarray, sx: int, sy: int, fill: bool) -> np.ndarray:
    """Boolean grid shifted so out[e] = grid[e + (sx, sy)], padded with fill."""
    out = np.full(grid.shape, fill, dtype=bool)
    nelx, nely = grid.shape
    if abs(sx) >= nelx or abs(sy) >= nely:
        return out
    xs_dst = slice(max(0, -sx), nelx - max(0, sx))
    ys_dst = slice(max(0, -sy), nely - max(0, sy))
    xs_src = slice(max(0, sx), nelx - max(0, -sx))
    ys_src = slice(max(0, sy), nely - max(0, -sy))
    out[xs_dst, ys_dst] = grid[xs_src, ys_src]
    return out


def _run_lengths(void: np.ndarray, d: int, cap: float, steplen: float) -> np.ndarray:
    """Length of the consecutive void run starting at offset 1 in direction d,
    capped at `cap`; cells outside the domain count as void."""
    sx, sy = STEPS[d]
    lengths = np.zeros(void.shape)
    alive = np.ones(void.shape, dtype=bool)
    k = 1
    while alive.any():
        alive &= _shift(void, k * sx, k * sy, fill=True)
        lengths[alive] += steplen
        alive &= lengths < cap
        k += 1
    return np.minimum(lengths, cap)


def apply(densities: DensityField, mesh: GridMesh, spec: ErosionSpec):
    """Erode thin-strut fringe; returns (new DensityField, ErosionReport).

    Only sub-threshold cells are ever modified, each to
    min(rho, rho_erased), then the global density floor is re-imposed.
    """
    rho = densities.rho_phys
    if rho.size != mesh.n_elements:
        raise ValueError("density field does not match mesh")
    if spec.radius > max(mesh.nelx, mesh.nely):
        return densities.copy(), ErosionReport(degenerate_radius=True)

    grid = mesh.grid_view(rho)
    material = grid >= spec.threshold_hi
    void = ~material
    cap = 2.0 * spec.radius

    lengths = {}
    for d in range(8):
        if not (spec.directions >> d & 1):
            continue
        diag = STEPS[d][0] != 0 and STEPS[d][1] != 0
        steplen = math.sqrt(2.0) if (spec.euclidean_diagonals and diag) else 1.0
        lengths[d] = _run_lengths(void, d, cap, steplen)

    erase = np.zeros(grid.shape, dtype=bool)
    sense_counts = [0] * 8
    for d, opp in OPPOSITE_PAIRS:
        if d not in lengths or opp not in lengths:
            continue
        triggered = material & (lengths[d] + lengths[opp] >= cap)
        if not triggered.any():
            continue
        for sense in (d, opp):
            sx, sy = STEPS[sense]
            # target cell sits at offset 1 from the trigger in this sense
            target = _shift(triggered, -sx, -sy, fill=False) & void
            sense_counts[sense] = int(target.sum())
            erase |= target

    new_grid = grid.copy()
    new_grid[erase] = np.minimum(new_grid[erase], spec.rho_erased)
    np.maximum(new_grid, densities.floor, out=new_grid)

    removed = float((grid[erase] - new_grid[erase]).sum()) / mesh.n_elements
    out = DensityField(densities.rho.copy(), new_grid.ravel(), densities.floor)
    report = ErosionReport(int(erase.sum()), removed, tuple(sense_counts),
                           erased_mask=erase.ravel())
    return out, report
