"""Metrics at sampling locations: points, buffer plots, moving windows.

Buffer membership uses cell centers: a cell belongs to a plot when its
center lies inside the selector shape.  Clipped plots are closed
sub-landscapes, so class and landscape metrics see only member cells.
"""

import warnings

import numpy as np
from scipy import ndimage

from .errors import IoError, UsageError
from .grid import CategoricalGrid, NumericGrid, PointSet
from .metrics import (CSV_HEADER, LANDSCAPE_METRICS, PATCH_METRICS,
                      MetricRecord, _check_which, _patch_values,
                      compute_class_metrics, compute_landscape_metrics)
from .patches import QUEEN, _structure, label_all, label_patches
from ._util import num_token


def extract_at_points(grid: CategoricalGrid, points: PointSet,
                      which=None, directions: int = QUEEN) -> list:
    """Patch metrics for the patch under each point.

    Returns (point_id, MetricRecord) pairs in point order.  Points
    outside the raster warn and yield nothing; points on missing cells
    yield nothing silently.
    """
    which = _check_which(which, PATCH_METRICS, "patch")
    labelings, values = {}, {}
    rows = []
    for pid, x, y in zip(points.ids, points.xs, points.ys):
        loc = grid.cell_at(x, y)
        if loc is None:
            warnings.warn(f"point {pid} at ({x}, {y}) falls outside the raster",
                          stacklevel=2)
            continue
        row, col = loc
        code = int(grid.data[row, col])
        if code == grid.nodata_code:
            continue
        if code not in labelings:
            labelings[code] = label_patches(grid, code, directions)
            values[code] = _patch_values(grid, labelings[code])
        patch = int(labelings[code].labels[row, col])
        for metric in which:
            rows.append((pid, MetricRecord(
                1, "patch", code, patch, metric,
                float(values[code][metric][patch - 1]))))
    return rows


def _member_mask(grid: CategoricalGrid, x: float, y: float,
                 shape: str, size: float) -> np.ndarray:
    cols = np.arange(grid.ncols)
    rows = np.arange(grid.nrows)
    cx = grid.xll + (cols + 0.5) * grid.cellsize
    cy = grid.yll + (grid.nrows - 1 - rows + 0.5) * grid.cellsize
    dx = np.abs(cx - x)[np.newaxis, :]
    dy = np.abs(cy - y)[:, np.newaxis]
    if shape == "circle":
        return dx ** 2 + dy ** 2 <= size * size
    if shape == "square":
        return (dx <= size) & (dy <= size)
    raise UsageError(f"unknown buffer shape {shape!r}; use circle or square")


def sample_buffers(grid: CategoricalGrid, points: PointSet, size: float,
                   shape: str = "circle", class_metrics=None,
                   landscape_metrics=None, directions: int = QUEEN) -> list:
    """Class/landscape metrics inside a buffer around each point.

    Returns (plot_id, percentage_inside, MetricRecord) triples.
    percentage_inside compares member cell area with the nominal buffer
    area (pi*size^2 for circles, (2*size)^2 for squares); plots clipped
    by the raster edge warn and report less than 100.
    """
    if size <= 0:
        raise UsageError("buffer size must be positive")
    if shape not in ("circle", "square"):
        raise UsageError(f"unknown buffer shape {shape!r}; use circle or square")
    nominal = np.pi * size * size if shape == "circle" else 4.0 * size * size
    xmin, ymin = grid.xll, grid.yll
    xmax = grid.xll + grid.ncols * grid.cellsize
    ymax = grid.yll + grid.nrows * grid.cellsize
    rows = []
    for pid, x, y in zip(points.ids, points.xs, points.ys):
        if x - size < xmin or x + size > xmax or y - size < ymin or y + size > ymax:
            warnings.warn(f"plot {pid}: buffer extends beyond the raster edge",
                          stacklevel=2)
        member = _member_mask(grid, x, y, shape, size)
        pct = 100.0 * member.sum() * grid.cellsize ** 2 / nominal
        if not member.any():
            warnings.warn(f"plot {pid}: no cells inside the buffer", stacklevel=2)
            continue
        rr, cc = np.nonzero(member)
        r0, r1 = rr.min(), rr.max() + 1
        c0, c1 = cc.min(), cc.max() + 1
        clipped = np.where(member[r0:r1, c0:c1], grid.data[r0:r1, c0:c1],
                           grid.nodata_code)
        sub = CategoricalGrid(
            clipped, grid.xll + c0 * grid.cellsize,
            grid.yll + (grid.nrows - r1) * grid.cellsize,
            grid.cellsize, grid.nodata_code)
        if not np.any(~sub.mask):
            warnings.warn(f"plot {pid}: only missing cells inside the buffer",
                          stacklevel=2)
            continue
        recs = []
        if class_metrics is None or class_metrics:
            recs += compute_class_metrics(sub, directions, class_metrics)
        if landscape_metrics is None or landscape_metrics:
            recs += compute_landscape_metrics(sub, directions, landscape_metrics)
        rows.extend((pid, pct, rec) for rec in recs)
    return rows


def spatialize_patch_metric(grid: CategoricalGrid, directions: int = QUEEN,
                            which=None) -> dict:
    """Patch metric values painted back onto the raster.

    Returns {metric: NumericGrid}; every cell of a patch carries that
    patch's value, all other cells are missing.
    """
    which = _check_which(which, PATCH_METRICS, "patch")
    outs = {m: np.full(grid.data.shape, np.nan) for m in which}
    for class_code, labeling in label_all(grid, directions).items():
        if not labeling.n_patches:
            continue
        values = _patch_values(grid, labeling)
        inside = labeling.labels > 0
        idx = labeling.labels[inside] - 1
        for m in which:
            outs[m][inside] = values[m][idx]
    return {m: NumericGrid(outs[m], grid.xll, grid.yll, grid.cellsize,
                           grid.nodata_code) for m in which}


def _window_landscape_value(vals: np.ndarray, sub_masked: np.ndarray,
                            metric: str, cellsize: float,
                            structure) -> float:
    """One landscape metric over the cells of a single window."""
    if vals.size == 0:
        return float("nan")
    if metric == "ta":
        return vals.size * cellsize * cellsize / 10000.0
    classes, counts = np.unique(vals, return_counts=True)
    if metric == "pr":
        return float(len(classes))
    if metric == "shdi":
        p = counts / counts.sum()
        return float(-np.sum(p * np.log(p)))
    # np and lpi need patch structure inside the window
    total, largest = 0, 0
    for code in classes:
        lab, n = ndimage.label(sub_masked == code, structure=structure)
        total += n
        if n:
            largest = max(largest, np.bincount(lab.ravel())[1:].max())
    if metric == "np":
        return float(total)
    return 100.0 * largest / vals.size  # lpi


def moving_window(grid: CategoricalGrid, mask: np.ndarray, metric: str,
                  directions: int = QUEEN) -> NumericGrid:
    """Slide a window over the raster, computing one landscape metric.

    mask is an odd-sized 0/1 matrix selecting the neighborhood around
    the focal cell.  Cells outside the raster are treated as missing;
    a missing focal cell gives a missing output cell.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[0] % 2 == 0 or mask.shape[1] % 2 == 0:
        raise UsageError("window mask must be 2-D with odd side lengths")
    if not np.isin(mask, (0, 1)).all():
        raise UsageError("window mask must contain only 0 and 1")
    if not mask.any():
        raise UsageError("window mask selects no cells")
    if metric not in LANDSCAPE_METRICS:
        raise UsageError(
            f"moving window supports landscape metrics only: "
            f"{', '.join(LANDSCAPE_METRICS)}")
    structure = _structure(directions)
    mask = mask.astype(bool)
    hr, hc = mask.shape[0] // 2, mask.shape[1] // 2
    data = grid.data
    known = ~grid.mask
    out = np.full(data.shape, np.nan)
    for i in range(grid.nrows):
        r0, r1 = max(0, i - hr), min(grid.nrows, i + hr + 1)
        mr0, mr1 = r0 - (i - hr), mask.shape[0] - ((i + hr + 1) - r1)
        for j in range(grid.ncols):
            if not known[i, j]:
                continue
            c0, c1 = max(0, j - hc), min(grid.ncols, j + hc + 1)
            mc0, mc1 = c0 - (j - hc), mask.shape[1] - ((j + hc + 1) - c1)
            sub = data[r0:r1, c0:c1]
            use = mask[mr0:mr1, mc0:mc1] & known[r0:r1, c0:c1]
            sub_masked = np.where(use, sub, grid.nodata_code)
            out[i, j] = _window_landscape_value(
                sub[use], sub_masked, metric, grid.cellsize, structure)
    return NumericGrid(out, grid.xll, grid.yll, grid.cellsize, grid.nodata_code)


def write_extract_csv(rows, path: str) -> None:
    """Extraction rows as tidy CSV with a trailing extract_id column."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(CSV_HEADER + ",extract_id\n")
            for point_id, rec in rows:
                f.write(f"{rec.csv_row()},{point_id}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def write_sample_csv(rows, path: str) -> None:
    """Buffer-plot rows as tidy CSV with plot_id and percentage_inside."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(CSV_HEADER + ",plot_id,percentage_inside\n")
            for plot_id, pct, rec in rows:
                f.write(f"{rec.csv_row()},{plot_id},{num_token(float(pct))}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
