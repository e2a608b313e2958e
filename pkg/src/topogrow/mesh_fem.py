"""Q4 plane-stress finite elements on a regular unit-square grid.

Conventions used across the package:

* nodes sit at integer coordinates (ix, iy) with y pointing up; node index
  n = ix*(nely+1) + iy (column-major), dofs (2n, 2n+1) = (ux, uy)
* elements are unit squares indexed e = ex*nely + ey (column-major); the
  element dof vector runs counterclockwise from the bottom-left corner
* density/field arrays are flat, length nelx*nely, in element order
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RHO_FLOOR = 1e-3

FIELD_KINDS = (
    "von_mises",
    "shear_strain",
    "displacement_x",
    "displacement_y",
    "strain_energy_density",
)


class SingularSystem(RuntimeError):
    """Constrained stiffness matrix is not solvable (insufficient supports)."""


class DimensionMismatch(ValueError):
    pass


class UnknownFieldKind(ValueError):
    pass


@dataclass(frozen=True)
class GridMesh:
    nelx: int
    nely: int

    def __post_init__(self):
        if self.nelx < 1 or self.nely < 1:
            raise ValueError(f"mesh must have at least 1x1 elements, got {self.nelx}x{self.nely}")

    @property
    def n_elements(self) -> int:
        return self.nelx * self.nely

    @property
    def n_nodes(self) -> int:
        return (self.nelx + 1) * (self.nely + 1)

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    def node(self, ix: int, iy: int) -> int:
        if not (0 <= ix <= self.nelx and 0 <= iy <= self.nely):
            raise ValueError(f"node ({ix},{iy}) outside mesh {self.nelx}x{self.nely}")
        return ix * (self.nely + 1) + iy

    def dof(self, ix: int, iy: int, component: str) -> int:
        return 2 * self.node(ix, iy) + {"x": 0, "y": 1}[component]

    def element(self, ex: int, ey: int) -> int:
        return ex * self.nely + ey

    def grid_view(self, values: np.ndarray) -> np.ndarray:
        """Reshape a flat element array to (nelx, nely)."""
        return np.asarray(values).reshape(self.nelx, self.nely)

    @property
    def edof(self) -> np.ndarray:
        return _edof_matrix(self.nelx, self.nely)


@lru_cache(maxsize=32)
def _edof_matrix(nelx: int, nely: int) -> np.ndarray:
    ex, ey = np.meshgrid(np.arange(nelx), np.arange(nely), indexing="ij")
    n1 = (ex * (nely + 1) + ey).ravel()
    n2 = ((ex + 1) * (nely + 1) + ey).ravel()
    edof = np.column_stack([
        2 * n1, 2 * n1 + 1, 2 * n2, 2 * n2 + 1,
        2 * n2 + 2, 2 * n2 + 3, 2 * n1 + 2, 2 * n1 + 3,
    ])
    edof.setflags(write=False)
    return edof


@dataclass(frozen=True)
class MaterialLaw:
    e0: float = 1.0
    emin: float = 1e-9
    nu: float = 0.3
    penal: float = 3.0

    def __post_init__(self):
        if not (0.0 < self.emin < self.e0):
            raise ValueError("need 0 < emin < e0")
        if not (0.0 < self.nu < 0.5):
            raise ValueError("need 0 < nu < 0.5")
        if self.penal < 1.0:
            raise ValueError("penalization exponent must be >= 1")

    def modulus(self, rho_phys: np.ndarray) -> np.ndarray:
        """Interpolated Young's modulus Emin + rho^p (E0 - Emin)."""
        return self.emin + rho_phys**self.penal * (self.e0 - self.emin)


@dataclass
class DensityField:
    """Design densities and the filtered physical densities actually solved."""

    rho: np.ndarray
    rho_phys: np.ndarray
    floor: float = RHO_FLOOR

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.rho_phys = np.asarray(self.rho_phys, dtype=float)
        if self.rho.shape != self.rho_phys.shape:
            raise DimensionMismatch("rho and rho_phys shapes differ")
        if self.floor <= 0.0:
            raise ValueError("density floor must be positive")
        for name, arr in (("rho", self.rho), ("rho_phys", self.rho_phys)):
            if arr.min() < self.floor - 1e-12 or arr.max() > 1.0 + 1e-12:
                raise ValueError(f"{name} outside [{self.floor}, 1]")

    @classmethod
    def uniform(cls, mesh: GridMesh, value: float, floor: float = RHO_FLOOR) -> "DensityField":
        arr = np.full(mesh.n_elements, float(value))
        return cls(arr, arr.copy(), floor)

    @property
    def volume(self) -> float:
        return float(self.rho_phys.mean())

    def copy(self) -> "DensityField":
        return DensityField(self.rho.copy(), self.rho_phys.copy(), self.floor)


@dataclass(frozen=True)
class LoadCase:
    """Supports plus point forces; forces maps dof index -> magnitude."""

    fixed_dofs: tuple
    forces: tuple  # of (dof, magnitude)
    weight: float = 1.0

    def __post_init__(self):
        if len(self.fixed_dofs) == 0:
            raise ValueError("load case needs at least one fixed dof")
        if self.weight <= 0.0:
            raise ValueError("load-case weight must be positive")

    @classmethod
    def from_nodes(cls, mesh: GridMesh, fixed, forces, weight: float = 1.0) -> "LoadCase":
        """Build from node-coordinate specs: fixed = [(ix,iy,comp)], forces =
        [(ix,iy,comp,mag)] where comp is 'x', 'y' or 'both' (fixed only)."""
        fdofs = set()
        for ix, iy, comp in fixed:
            comps = ("x", "y") if comp == "both" else (comp,)
            for c in comps:
                fdofs.add(mesh.dof(ix, iy, c))
        fvec = {}
        for ix, iy, comp, mag in forces:
            dof = mesh.dof(ix, iy, comp)
            fvec[dof] = fvec.get(dof, 0.0) + float(mag)
        return cls(tuple(sorted(fdofs)), tuple(sorted(fvec.items())), weight)

    def force_vector(self, n_dofs: int) -> np.ndarray:
        f = np.zeros(n_dofs)
        for dof, mag in self.forces:
            if dof >= n_dofs:
                raise DimensionMismatch(f"force dof {dof} outside mesh with {n_dofs} dofs")
            f[dof] = mag
        # a load on a support is a reaction, not an applied force
        f[list(self.fixed_dofs)] = 0.0
        return f


@dataclass
class FieldMap:
    kind: str
    values: np.ndarray


def element_stiffness(law: MaterialLaw) -> np.ndarray:
    """Unit-modulus 8x8 stiffness of the unit-square Q4; scale by modulus(rho)."""
    return _ke_for_nu(law.nu).copy()


@lru_cache(maxsize=8)
def _ke_for_nu(nu: float) -> np.ndarray:
    k = np.array([
        0.5 - nu / 6.0, 0.125 + nu / 8.0, -0.25 - nu / 12.0, -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0, -0.125 - nu / 8.0, nu / 6.0, 0.125 - 3.0 * nu / 8.0,
    ])
    idx = np.array([
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ])
    ke = k[idx] / (1.0 - nu**2)
    ke.setflags(write=False)
    return ke


def _assemble(mesh: GridMesh, law: MaterialLaw, densities: DensityField) -> sp.csc_matrix:
    if densities.rho_phys.size != mesh.n_elements:
        raise DimensionMismatch(
            f"density field has {densities.rho_phys.size} entries, mesh has {mesh.n_elements} elements")
    ke = _ke_for_nu(law.nu)
    edof = mesh.edof
    scale = law.modulus(densities.rho_phys)
    data = (ke.ravel()[None, :] * scale[:, None]).ravel()
    rows = np.repeat(edof, 8, axis=1).ravel()
    cols = np.tile(edof, (1, 8)).ravel()
    return sp.coo_matrix((data, (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)).tocsc()


class StiffnessSystem:
    """Factorized stiffness for one density state; solves many load cases."""

    def __init__(self, mesh: GridMesh, law: MaterialLaw, densities: DensityField):
        self.mesh = mesh
        self.law = law
        kmat = _assemble(mesh, law, densities)
        self._kmat = kmat
        self._factor_cache = {}

    def _check_constraints(self, fixed_dofs):
        """With a positive modulus floor the global null space is exactly the
        three rigid-body modes, so the supports must restrain all of them."""
        fixed = np.asarray(fixed_dofs, dtype=int)
        nodes = fixed // 2
        comp = fixed % 2
        ix = nodes // (self.mesh.nely + 1)
        iy = nodes % (self.mesh.nely + 1)
        modes = np.zeros((fixed.size, 3))
        modes[comp == 0, 0] = 1.0                    # x translation
        modes[comp == 1, 1] = 1.0                    # y translation
        modes[comp == 0, 2] = -iy[comp == 0]         # linearized rotation
        modes[comp == 1, 2] = ix[comp == 1]
        if np.linalg.matrix_rank(modes, tol=1e-9) < 3:
            raise SingularSystem(
                "supports do not restrain all rigid-body modes")

    def solve(self, load: LoadCase) -> np.ndarray:
        self._check_constraints(load.fixed_dofs)
        free = self._free_dofs(load.fixed_dofs)
        kff = self._kmat[free][:, free]
        ff = load.force_vector(self.mesh.n_dofs)[free]
        try:
            lu = self._factor(load.fixed_dofs)
            uf = lu.solve(ff)
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(uf)):
            raise SingularSystem("non-finite solution; check supports")
        fnorm = np.linalg.norm(ff)
        if fnorm > 0:
            # iterative refinement: high density contrast (solid vs floored
            # void) can leave the raw LU residual above the 1e-8 contract
            for _ in range(3):
                r = ff - kff @ uf
                if np.linalg.norm(r) / fnorm <= 1e-10:
                    break
                uf = uf + lu.solve(r)
            rnorm = np.linalg.norm(ff - kff @ uf)
            if rnorm / fnorm > 1e-8:
                # when a load hangs on floor-stiffness void, |u| ~ 1e8 and
                # eps*|K|*|u| exceeds 1e-8*|f|: no double-precision vector
                # can meet the relative bound. Fall back to the normwise
                # backward error, which machine-exact solutions do satisfy.
                knorm = np.abs(kff).sum(axis=1).max()
                eta = rnorm / (knorm * np.abs(uf).max() + fnorm)
                if eta > 1e-12:
                    raise SingularSystem(
                        f"solver residual {rnorm / fnorm:.2e} exceeds 1e-8 "
                        f"(backward error {eta:.2e})")
        u = np.zeros(self.mesh.n_dofs)
        u[free] = uf
        return u

    def _free_dofs(self, fixed_dofs) -> np.ndarray:
        return np.setdiff1d(np.arange(self.mesh.n_dofs), np.asarray(fixed_dofs, dtype=int))

    def _factor(self, fixed_dofs):
        key = tuple(fixed_dofs)
        if key not in self._factor_cache:
            free = self._free_dofs(fixed_dofs)
            self._factor_cache[key] = spla.splu(self._kmat[free][:, free])
        return self._factor_cache[key]


def assemble_and_solve(mesh: GridMesh, law: MaterialLaw, densities: DensityField,
                       load: LoadCase) -> np.ndarray:
    """Solve K(rho) u = f for one load case; see StiffnessSystem for batches."""
    return StiffnessSystem(mesh, law, densities).solve(load)


def element_energy_quadratic(u: np.ndarray, mesh: GridMesh, law: MaterialLaw) -> np.ndarray:
    """Per-element u_e^T k0 u_e with the unit-modulus element matrix.

    The form is positive semidefinite; roundoff negatives (possible when a
    hanging load inflates |u| past 1e7) are clamped to zero so downstream
    sign contracts hold.
    """
    if u.size != mesh.n_dofs:
        raise DimensionMismatch(f"displacement has {u.size} entries, expected {mesh.n_dofs}")
    ue = u[mesh.edof]
    q = np.einsum("ni,ij,nj->n", ue, _ke_for_nu(law.nu), ue)
    return np.maximum(q, 0.0)


def compliance(u: np.ndarray, mesh: GridMesh, law: MaterialLaw,
               densities: DensityField) -> tuple[float, np.ndarray]:
    """Compliance c = sum_e E(rho_e) u_e^T k0 u_e and per-element strain
    energy density (c_e / 2 for unit-area elements)."""
    q = element_energy_quadratic(u, mesh, law)
    ce = law.modulus(densities.rho_phys) * q
    return float(ce.sum()), ce / 2.0


_B_CENTER = np.array([
    [-0.5, 0.0, 0.5, 0.0, 0.5, 0.0, -0.5, 0.0],
    [0.0, -0.5, 0.0, -0.5, 0.0, 0.5, 0.0, 0.5],
    [-0.5, -0.5, -0.5, 0.5, 0.5, 0.5, 0.5, -0.5],
])


def field_map(kind: str, u: np.ndarray, mesh: GridMesh, law: MaterialLaw,
              densities: DensityField, normalize: bool = False) -> FieldMap:
    """Element-centroid scalar field derived from a displacement solution."""
    if kind not in FIELD_KINDS:
        raise UnknownFieldKind(f"{kind!r}; expected one of {FIELD_KINDS}")
    if u.size != mesh.n_dofs:
        raise DimensionMismatch(f"displacement has {u.size} entries, expected {mesh.n_dofs}")
    ue = u[mesh.edof]

    if kind == "displacement_x":
        values = ue[:, 0::2].mean(axis=1)
    elif kind == "displacement_y":
        values = ue[:, 1::2].mean(axis=1)
    else:
        strain = ue @ _B_CENTER.T  # rows: (eps_xx, eps_yy, gamma_xy)
        if kind == "shear_strain":
            values = strain[:, 2]
        else:
            dbar = np.array([
                [1.0, law.nu, 0.0],
                [law.nu, 1.0, 0.0],
                [0.0, 0.0, (1.0 - law.nu) / 2.0],
            ]) / (1.0 - law.nu**2)
            stress = law.modulus(densities.rho_phys)[:, None] * (strain @ dbar.T)
            if kind == "von_mises":
                sxx, syy, txy = stress[:, 0], stress[:, 1], stress[:, 2]
                values = np.sqrt(np.maximum(sxx**2 - sxx * syy + syy**2 + 3.0 * txy**2, 0.0))
            else:  # strain_energy_density
                values = 0.5 * np.einsum("ni,ni->n", stress, strain)
                values = np.maximum(values, 0.0)

    if normalize:
        peak = np.abs(values).max()
        if peak > 0:
            values = values / peak
    return FieldMap(kind, values)
