"""Erosion filter semantics, pinned by the brute-force reference."""

import numpy as np
import pytest

import topogrow as tg
from topogrow import twigcutter

from oracles import brute_force_erosion


def field_from(arr2d, floor=1e-3):
    """Build a DensityField from an (nelx, nely) array."""
    flat = np.asarray(arr2d, dtype=float).ravel()
    return tg.DensityField(flat, flat.copy(), floor)


def strut_field(nelx=40, nely=40, rows=(20,), sea=0.05, strut=0.9):
    grid = np.full((nelx, nely), sea)
    for row in rows:
        grid[:, row] = strut
    return grid


def test_all_solid_unchanged():
    mesh = tg.GridMesh(12, 12)
    dens = tg.DensityField.uniform(mesh, 1.0)
    out, report = twigcutter.apply(dens, mesh, tg.ErosionSpec(radius=3))
    assert np.array_equal(out.rho_phys, dens.rho_phys)
    assert report.erased_count == 0


def test_all_void_unchanged():
    mesh = tg.GridMesh(12, 12)
    dens = tg.DensityField.uniform(mesh, 1e-3)
    out, report = twigcutter.apply(dens, mesh, tg.ErosionSpec(radius=3))
    assert np.array_equal(out.rho_phys, dens.rho_phys)
    assert report.erased_count == 0


def test_thin_strut_fringe_erased_thick_strut_untouched():
    """1-element strut loses its adjacent fringe at r=3; an 8-element-thick
    strut in the same sea keeps every cell of its interior rows."""
    nelx = nely = 40
    mesh = tg.GridMesh(nelx, nely)
    grid = strut_field(nelx, nely, rows=(5,))
    grid[:, 20:28] = 0.9  # 8-element-thick slab
    dens = field_from(grid)
    spec = tg.ErosionSpec(radius=3)
    out, report = twigcutter.apply(dens, mesh, spec)
    new = out.rho_phys.reshape(nelx, nely)

    # vertical pair runs through the sea: l3 + l7 >= 6 for every strut cell,
    # so the first adjacent sea cells above and below the thin strut go void
    assert np.all(new[:, 4] == spec.rho_erased)
    assert np.all(new[:, 6] == spec.rho_erased)
    assert np.all(new[:, 5] == 0.9)

    # the slab itself is never modified (only sub-threshold cells are)
    assert np.all(new[:, 20:28] == 0.9)

    oracle, count, senses, _ = brute_force_erosion(dens.rho_phys, nelx, nely, 3)
    assert np.array_equal(out.rho_phys, oracle)
    assert report.erased_count == count
    assert list(report.sense_counts) == senses


def test_matches_brute_force_on_random_fields():
    rng = np.random.RandomState(42)
    masks = [twigcutter.ALL_DIRECTIONS, twigcutter.HORIZONTAL, twigcutter.VERTICAL,
             twigcutter.ORTHOGONAL, twigcutter.DIAGONAL]
    for trial in range(20):
        nelx, nely = rng.randint(6, 30), rng.randint(6, 30)
        rho = np.clip(rng.rand(nelx * nely) ** 0.5, 1e-3, 1.0)
        mesh = tg.GridMesh(nelx, nely)
        spec = tg.ErosionSpec(radius=int(rng.randint(1, 6)),
                              directions=masks[rng.randint(len(masks))])
        out, report = twigcutter.apply(tg.DensityField(rho, rho.copy()), mesh, spec)
        oracle, count, senses, _ = brute_force_erosion(
            rho, nelx, nely, spec.radius, directions=spec.directions)
        assert np.array_equal(out.rho_phys, oracle), f"trial {trial}"
        assert report.erased_count == count


def test_material_cells_never_modified_and_mean_never_increases():
    rng = np.random.RandomState(1)
    for _ in range(10):
        nelx = nely = 25
        rho = np.clip(rng.rand(nelx * nely) ** 0.4, 1e-3, 1.0)
        mesh = tg.GridMesh(nelx, nely)
        dens = tg.DensityField(rho, rho.copy())
        spec = tg.ErosionSpec(radius=2)
        out, _ = twigcutter.apply(dens, mesh, spec)
        material = rho >= spec.threshold_hi
        assert np.array_equal(out.rho_phys[material], rho[material])
        assert out.rho_phys.mean() <= rho.mean() + 1e-15


def test_design_densities_left_untouched_by_apply():
    mesh = tg.GridMesh(20, 20)
    grid = strut_field(20, 20, rows=(10,))
    dens = field_from(grid)
    out, _ = twigcutter.apply(dens, mesh, tg.ErosionSpec(radius=3))
    assert np.array_equal(out.rho, dens.rho)


def test_double_application_cascade_is_local():
    """A second pass may cascade, but only near cells the first pass cut."""
    rng = np.random.RandomState(9)
    nelx = nely = 30
    spec = tg.ErosionSpec(radius=3)
    mesh = tg.GridMesh(nelx, nely)
    rho = np.clip(rng.rand(nelx * nely) ** 0.4, 1e-3, 1.0)
    dens = tg.DensityField(rho, rho.copy())
    once, rep1 = twigcutter.apply(dens, mesh, spec)
    twice, rep2 = twigcutter.apply(once, mesh, spec)
    changed1 = np.flatnonzero(once.rho_phys != dens.rho_phys)
    changed2 = np.flatnonzero(twice.rho_phys != once.rho_phys)
    if changed2.size:
        assert changed1.size
        reach = 2 * spec.radius + 1
        c1 = np.column_stack(np.divmod(changed1, nely))
        for e in changed2:
            pos = np.array(divmod(e, nely))
            cheb = np.abs(c1 - pos).max(axis=1).min()
            assert cheb <= reach


def test_masked_axis_rows_are_independent():
    """With only the horizontal pair enabled, a row's output depends on that
    row's content alone."""
    rng = np.random.RandomState(3)
    nelx = nely = 20
    mesh = tg.GridMesh(nelx, nely)
    spec = tg.ErosionSpec(radius=2, directions=twigcutter.HORIZONTAL)
    base = np.clip(rng.rand(nelx, nely) ** 0.4, 1e-3, 1.0)
    row = 7
    for _ in range(5):
        other = np.clip(rng.rand(nelx, nely) ** 0.4, 1e-3, 1.0)
        other[:, row] = base[:, row]
        out_a, _ = twigcutter.apply(field_from(base), mesh, spec)
        out_b, _ = twigcutter.apply(field_from(other), mesh, spec)
        np.testing.assert_array_equal(out_a.rho_phys.reshape(nelx, nely)[:, row],
                                      out_b.rho_phys.reshape(nelx, nely)[:, row])


def test_degenerate_radius_returns_input_with_warning():
    mesh = tg.GridMesh(10, 8)
    dens = tg.DensityField.uniform(mesh, 0.9)
    out, report = twigcutter.apply(dens, mesh, tg.ErosionSpec(radius=11))
    assert report.degenerate_radius
    assert np.array_equal(out.rho_phys, dens.rho_phys)


def test_volume_removed_accounting():
    nelx = nely = 40
    mesh = tg.GridMesh(nelx, nely)
    dens = field_from(strut_field(nelx, nely, rows=(20,)))
    out, report = twigcutter.apply(dens, mesh, tg.ErosionSpec(radius=3))
    removed = (dens.rho_phys - out.rho_phys).sum() / mesh.n_elements
    assert report.volume_removed >= 0.0
    assert abs(report.volume_removed - removed) <= 1e-15
    assert report.erased_count == int((dens.rho_phys != out.rho_phys).sum())


def test_erased_value_never_raises_a_cell():
    """Cells already below rho_erased keep their value (min semantics)."""
    nelx = nely = 12
    mesh = tg.GridMesh(nelx, nely)
    grid = np.full((nelx, nely), 5e-4)
    grid[:, 6] = 0.95
    dens = field_from(grid, floor=1e-4)
    out, _ = twigcutter.apply(dens, mesh, tg.ErosionSpec(radius=3, rho_erased=0.001))
    assert out.rho_phys.mean() <= dens.rho_phys.mean() + 1e-15
    assert np.all(out.rho_phys.reshape(nelx, nely)[:, 5] == 5e-4)


# ---------------------------------------------------------------------------
# diagonal_step and spec validation
# ---------------------------------------------------------------------------

def test_diagonal_step_basic():
    mesh = tg.GridMesh(5, 5)
    assert twigcutter.diagonal_step(mesh, (0, 0), 2) == (1, 1)  # up-right
    assert twigcutter.diagonal_step(mesh, (4, 2), 1) is None   # off the right edge
    assert twigcutter.diagonal_step(mesh, (4, 2), 8) is None
    assert twigcutter.diagonal_step(mesh, (2, 2), 5) == (1, 2)
    with pytest.raises(ValueError):
        twigcutter.diagonal_step(mesh, (0, 0), 9)


def test_diagonal_traversal_visits_n_minus_1():
    n = 7
    mesh = tg.GridMesh(n, n)
    pos, visited = (0, 0), 0
    while True:
        pos = twigcutter.diagonal_step(mesh, pos, 2)
        if pos is None:
            break
        visited += 1
    assert visited == n - 1


def test_spec_validation():
    with pytest.raises(ValueError):
        tg.ErosionSpec(radius=0)
    with pytest.raises(ValueError):
        tg.ErosionSpec(radius=2, rho_erased=0.9, threshold_hi=0.8)
    with pytest.raises(ValueError):
        tg.ErosionSpec(radius=2, directions=0b00000001)  # l1 without l5
    with pytest.raises(ValueError):
        tg.ErosionSpec(radius=2, cadence=0)


def test_activation_cadence():
    spec = tg.ErosionSpec(radius=2, cadence=10, activation_iter=30)
    active = [i for i in range(60) if spec.active_at(i)]
    assert active == [30, 40, 50]
