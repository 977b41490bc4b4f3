"""Patch delineation and per-patch geometry.

A patch is a maximal set of same-class cells connected under the
chosen rule: rook (4 neighbors, edges only) or queen (8 neighbors,
edges and corners).  Patch ids are per class, starting at 1, assigned
in raster scan order of each patch's first cell, so results are
reproducible regardless of labeling internals.
"""

import random
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import UsageError
from .grid import CategoricalGrid

ROOK = 4
QUEEN = 8

_STRUCTURES = {
    ROOK: ndimage.generate_binary_structure(2, 1),
    QUEEN: ndimage.generate_binary_structure(2, 2),
}


def _structure(directions: int):
    try:
        return _STRUCTURES[directions]
    except KeyError:
        raise UsageError(f"directions must be 4 or 8, got {directions}") from None


@dataclass
class PatchLabeling:
    """Connected-component labeling of one class.

    labels has the grid's shape; 0 marks cells outside the class and
    1..n_patches the patch each class cell belongs to.  cell_counts[i]
    is the size of patch i+1, bboxes[i] its (r0, r1, c0, c1) extent
    as half-open slices.
    """

    class_code: int
    directions: int
    labels: np.ndarray
    cell_counts: np.ndarray
    bboxes: list

    @property
    def n_patches(self) -> int:
        return len(self.cell_counts)

    def patch_ids(self):
        return range(1, self.n_patches + 1)


def label_patches(grid: CategoricalGrid, class_code: int,
                  directions: int = QUEEN) -> PatchLabeling:
    """Label the patches of one class.

    Ids are renumbered so that patch 1 is the one whose first cell
    appears earliest in row-major order, patch 2 the next, and so on.
    """
    structure = _structure(directions)
    mask = grid.data == class_code
    raw, n = ndimage.label(mask, structure=structure)
    if n > 0:
        # renumber by first appearance in scan order
        flat = raw.ravel()
        first = np.full(n + 1, flat.size, dtype=np.int64)
        nz = np.flatnonzero(flat)
        # reversed so earlier indices win the final write
        first[flat[nz[::-1]]] = nz[::-1]
        order = np.argsort(first[1:], kind="stable")
        remap = np.zeros(n + 1, dtype=np.int64)
        remap[1 + order] = np.arange(1, n + 1)
        labels = remap[raw]
    else:
        labels = raw.astype(np.int64)
    counts = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    slices = ndimage.find_objects(labels)
    bboxes = [(s[0].start, s[0].stop, s[1].start, s[1].stop) for s in slices]
    return PatchLabeling(class_code, directions, labels, counts, bboxes)


def label_all(grid: CategoricalGrid, directions: int = QUEEN) -> dict:
    """PatchLabeling for every class present, keyed by class code."""
    return {c: label_patches(grid, c, directions) for c in grid.classes}


def get_boundaries(labeling: PatchLabeling, grid: CategoricalGrid) -> CategoricalGrid:
    """Mark each labeled cell as edge (1) or core (0).

    A cell is edge iff any rook neighbor is outside the raster, missing,
    or belongs to a different class.  Cells outside the labeling's class
    are nodata in the result.
    """
    same = grid.data == labeling.class_code
    padded = np.pad(same, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1] &
                padded[1:-1, :-2] & padded[1:-1, 2:])
    out = np.full(grid.data.shape, grid.nodata_code, dtype=np.int64)
    out[same] = np.where(interior[same], 0, 1)
    return CategoricalGrid(out, grid.xll, grid.yll, grid.cellsize,
                           grid.nodata_code, dict(grid.meta))


@dataclass
class AdjacencyMatrix:
    """Ordered counts of rook-adjacent cell pairs per class pair.

    counts[i, j] is the number of ordered pairs whose first cell has
    classes[i] and second classes[j]; the matrix is symmetric and its
    total is twice the number of unordered adjacencies.
    """

    classes: list
    counts: np.ndarray


def _neighbor_slices(data: np.ndarray):
    """Right and down neighbor views covering each unordered pair once."""
    yield data[:, :-1], data[:, 1:]
    yield data[:-1, :], data[1:, :]


def get_adjacencies(grid: CategoricalGrid) -> AdjacencyMatrix:
    """Count rook adjacencies between classes; pairs touching a missing
    cell are skipped."""
    classes = grid.classes
    lut = np.full(max(int(grid.data.max()) + 2, 1), -1, dtype=np.int64)
    for i, c in enumerate(classes):
        lut[c] = i
    valid_vals = grid.data != grid.nodata_code
    idx = np.where(valid_vals, lut[np.where(valid_vals, grid.data, 0)], -1)
    n = len(classes)
    counts = np.zeros((n, n), dtype=np.int64)
    for a, b in _neighbor_slices(idx):
        ok = (a >= 0) & (b >= 0)
        ai, bi = a[ok], b[ok]
        np.add.at(counts, (ai, bi), 1)
        np.add.at(counts, (bi, ai), 1)
    return AdjacencyMatrix(classes, counts)


def get_unique_values(grid: CategoricalGrid) -> list:
    """Sorted distinct class codes (missing excluded)."""
    return grid.classes


def _edge_cells_by_patch(labeling: PatchLabeling, grid: CategoricalGrid):
    """(patch id array, x array, y array) for all edge cells."""
    edges = get_boundaries(labeling, grid)
    rr, cc = np.nonzero(edges.data == 1)
    ids = labeling.labels[rr, cc]
    xs = grid.xll + (cc + 0.5) * grid.cellsize
    ys = grid.yll + (grid.nrows - 1 - rr + 0.5) * grid.cellsize
    return ids, xs, ys


def nearest_neighbor_distances(labeling: PatchLabeling,
                               grid: CategoricalGrid) -> list:
    """Shortest center-to-center distance from each patch's edge cells
    to any other patch of the same class.

    Returns (patch_id, distance, neighbor_id) tuples in patch id order.
    With fewer than two patches there is no neighbor: distances are NaN
    and a warning is raised.
    """
    n = labeling.n_patches
    if n < 2:
        warnings.warn(
            f"class {labeling.class_code}: nearest-neighbor distance needs "
            f"at least 2 patches, found {n}", stacklevel=2)
        return [(pid, float("nan"), None) for pid in labeling.patch_ids()]
    ids, xs, ys = _edge_cells_by_patch(labeling, grid)
    points = np.column_stack([xs, ys])
    out = []
    for pid in labeling.patch_ids():
        own = ids == pid
        tree = cKDTree(points[~own])
        other_ids = ids[~own]
        dists, nearest = tree.query(points[own])
        best = int(np.argmin(dists))
        out.append((pid, float(dists[best]), int(other_ids[nearest[best]])))
    return out


# --- smallest enclosing circle (expected-linear incremental method) ---

_EPS = 1e-12


def _circle_two(p, q):
    cx, cy = (p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0
    r = max(np.hypot(cx - p[0], cy - p[1]), np.hypot(cx - q[0], cy - q[1]))
    return cx, cy, r


def _circle_three(a, b, c):
    """Circumcircle, or None when the points are collinear."""
    ox, oy = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0, \
             (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(np.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return x, y, r


def _in_circle(circle, p) -> bool:
    if circle is None:
        return False
    cx, cy, r = circle
    return np.hypot(p[0] - cx, p[1] - cy) <= r * (1 + _EPS) + _EPS


def enclosing_circle(points) -> tuple:
    """Smallest circle containing every point: (cx, cy, radius).

    Incremental construction with expected linear cost; the shuffle is
    seeded so repeated runs give identical output.
    """
    pts = [tuple(map(float, p)) for p in points]
    if not pts:
        raise ValueError("enclosing_circle needs at least one point")
    random.Random(1723).shuffle(pts)
    circle = (pts[0][0], pts[0][1], 0.0)
    for i, p in enumerate(pts[1:], start=1):
        if _in_circle(circle, p):
            continue
        # p lies on the boundary of the smallest circle of pts[:i+1]
        circle = (p[0], p[1], 0.0)
        for j, q in enumerate(pts[:i]):
            if _in_circle(circle, q):
                continue
            circle = _circle_two(p, q)
            for s in pts[:j]:
                if _in_circle(circle, s):
                    continue
                three = _circle_three(p, q, s)
                if three is not None:
                    circle = three
    return circle


def _patch_corner_points(labeling: PatchLabeling, grid: CategoricalGrid, pid: int):
    """Distinct map-coordinates of the corners of a patch's cells."""
    r0, r1, c0, c1 = labeling.bboxes[pid - 1]
    rr, cc = np.nonzero(labeling.labels[r0:r1, c0:c1] == pid)
    rr, cc = rr + r0, cc + c0
    cs = grid.cellsize
    x_left = grid.xll + cc * cs
    y_top = grid.yll + (grid.nrows - rr) * cs
    corners = set()
    for dx, dy in ((0, 0), (cs, 0), (0, -cs), (cs, -cs)):
        corners.update(zip((x_left + dx).tolist(), (y_top + dy).tolist()))
    return list(corners)


def circumscribing_circles(labeling: PatchLabeling,
                           grid: CategoricalGrid) -> list:
    """Smallest circle around each patch's cell corners.

    Returns (patch_id, diameter, center_x, center_y) tuples; diameters
    are in map units.
    """
    out = []
    for pid in labeling.patch_ids():
        cx, cy, r = enclosing_circle(_patch_corner_points(labeling, grid, pid))
        out.append((pid, 2.0 * r, cx, cy))
    return out


def centroids(labeling: PatchLabeling, grid: CategoricalGrid) -> list:
    """Arithmetic mean of member cell centers per patch: (id, x, y)."""
    rr, cc = np.nonzero(labeling.labels)
    ids = labeling.labels[rr, cc]
    xs = grid.xll + (cc + 0.5) * grid.cellsize
    ys = grid.yll + (grid.nrows - 1 - rr + 0.5) * grid.cellsize
    n = labeling.n_patches
    counts = np.bincount(ids, minlength=n + 1)[1:]
    sx = np.bincount(ids, weights=xs, minlength=n + 1)[1:]
    sy = np.bincount(ids, weights=ys, minlength=n + 1)[1:]
    return [(pid, sx[pid - 1] / counts[pid - 1], sy[pid - 1] / counts[pid - 1])
            for pid in labeling.patch_ids()]
