"""Portable graymap I/O and density/field image conversions.

All images are binary 8-bit PGM (P5), row-major with the top row at y-max,
so they view correctly in any image tool and stay diff-friendly. A density
image maps pixel/255 -> rho; field images are max-normalized unless noted.
"""

from __future__ import annotations

import numpy as np

from .mesh_fem import GridMesh


class IoError(RuntimeError):
    pass


class ResizeError(ValueError):
    pass


def write_pgm(path, img: np.ndarray):
    img = np.asarray(img)
    if img.ndim != 2:
        raise IoError("PGM image must be 2-D")
    if img.dtype != np.uint8:
        raise IoError("PGM image must be uint8")
    h, w = img.shape
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(img.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_pgm(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    # header: magic, width, height, maxval; '#' comments allowed between tokens
    tokens, pos = [], 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise IoError(f"{path}: truncated PGM header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            pos = data.index(b"\n", pos) + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    if tokens[0] != b"P5":
        raise IoError(f"{path}: not a binary PGM (P5)")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise IoError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    pos += 1  # single whitespace after maxval
    raster = data[pos:pos + w * h]
    if len(raster) != w * h:
        raise IoError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


def quantize(values: np.ndarray) -> np.ndarray:
    """Unit-interval floats to uint8 pixels."""
    return np.clip(np.rint(np.asarray(values) * 255.0), 0, 255).astype(np.uint8)


def density_to_image(rho: np.ndarray, mesh: GridMesh) -> np.ndarray:
    """Flat element densities -> (nely, nelx) image, top row = y-max."""
    grid = mesh.grid_view(np.asarray(rho, dtype=float))  # (nelx, nely)
    return quantize(grid.T[::-1, :])


def image_to_density(img: np.ndarray, mesh: GridMesh) -> np.ndarray:
    """Inverse of density_to_image (up to 8-bit quantization)."""
    if img.shape != (mesh.nely, mesh.nelx):
        raise ResizeError(
            f"image {img.shape} does not match mesh ({mesh.nely}, {mesh.nelx})")
    grid = (np.asarray(img, dtype=float) / 255.0)[::-1, :].T
    return grid.ravel()


def field_to_image(values: np.ndarray, mesh: GridMesh, normalize: bool = True) -> np.ndarray:
    grid = mesh.grid_view(np.asarray(values, dtype=float)).T[::-1, :]
    if normalize:
        peak = np.abs(grid).max()
        if peak > 0:
            grid = grid / peak
    return quantize(np.abs(grid))


def mask_to_image(mask: np.ndarray, mesh: GridMesh) -> np.ndarray:
    grid = mesh.grid_view(np.asarray(mask, dtype=bool)).T[::-1, :]
    return np.where(grid, np.uint8(255), np.uint8(0))


def _overlap_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic box-overlap weights mapping n_in cells onto n_out."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            m[i, j] = min(hi, j + 1) - max(lo, j)
    return m / scale


def resize_area(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Area-averaging resize of a float image (H, W) -> (height, width);
    conserves the mean exactly up to roundoff."""
    if width < 1 or height < 1:
        raise ResizeError(f"target size {width}x{height} must be positive")
    img = np.asarray(img, dtype=float)
    mh = _overlap_matrix(img.shape[0], height)
    mw = _overlap_matrix(img.shape[1], width)
    return mh @ img @ mw.T
