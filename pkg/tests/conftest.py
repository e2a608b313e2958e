import numpy as np
import pytest

import topogrow as tg


@pytest.fixture
def law():
    return tg.MaterialLaw()


@pytest.fixture
def cantilever_small():
    """12x6 cantilever: clamped left wall, unit downward tip load."""
    mesh = tg.GridMesh(12, 6)
    fixed = [(0, iy, "both") for iy in range(7)]
    load = tg.LoadCase.from_nodes(mesh, fixed, [(12, 3, "y", -1.0)])
    return mesh, load


def make_cantilever(nelx, nely, tip_iy=None, mag=-1.0):
    mesh = tg.GridMesh(nelx, nely)
    fixed = [(0, iy, "both") for iy in range(nely + 1)]
    tip_iy = nely // 2 if tip_iy is None else tip_iy
    load = tg.LoadCase.from_nodes(mesh, fixed, [(nelx, tip_iy, "y", mag)])
    return mesh, load
