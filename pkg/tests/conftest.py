"""Shared fixture helpers: small grids built by hand, random grids by seed."""

import numpy as np
import pytest

from landpat.grid import CategoricalGrid, write_ascii_grid


def make_grid(rows, cellsize=100.0, xll=0.0, yll=0.0, nodata=-9999, meta=None):
    """Grid from a nested list; use the nodata code for missing cells."""
    return CategoricalGrid(np.asarray(rows, dtype=np.int64), xll, yll,
                           cellsize, nodata, meta or {})


def random_grid(rng, nrows, ncols, n_classes=4, missing_frac=0.1,
                cellsize=100.0):
    """Random categorical grid with roughly missing_frac missing cells."""
    data = rng.integers(1, n_classes + 1, size=(nrows, ncols))
    if missing_frac > 0:
        holes = rng.random((nrows, ncols)) < missing_frac
        data = np.where(holes, -9999, data)
    return CategoricalGrid(data, 0.0, 0.0, cellsize, -9999)


@pytest.fixture
def tiny_grid():
    return make_grid([[1, 1], [1, 2]])


def write_fixture(path, grid):
    write_ascii_grid(grid, str(path))
    return str(path)
