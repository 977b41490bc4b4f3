"""Spatial signatures: compact distributions describing raster pattern.

A signature summarizes one analysis window as a normalized vector on a
fixed class basis, so windows and rasters can be compared directly:

- composition: share of each class among known cells.
- cove: distribution of unordered rook adjacencies between class pairs
  (lower triangle of the co-occurrence matrix, diagonal included).
- wecove: cove with each adjacency weighted by the mean of the two
  cells' weights from a co-registered weight raster.
- incove: cove over combined classes from two or more co-registered
  rasters; a cell's combined class is the tuple of its classes.

Windows come from one lattice of k x k blocks, from a zone raster, or
cover the whole raster.  Each window is a closed sub-landscape:
adjacencies across window borders are not counted.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._util import num_token
from .errors import IoError, ParseError, UsageError
from .grid import CategoricalGrid, NumericGrid

SIGNATURE_KINDS = ("composition", "cove", "wecove", "incove")


@dataclass
class Signature:
    """One window's signature vector.

    The vector sums to 1 unless the window had nothing to count (all
    missing, or no adjacencies), in which case it is all zeros.
    na_prop is the missing fraction of the window's cells.
    """

    id: int
    na_prop: float
    vector: np.ndarray
    kind: str
    class_basis: tuple


class WindowGrid:
    """Partition of a raster's extent into analysis windows.

    Block mode tiles the raster with k x k cell blocks anchored at the
    top-left corner; edge blocks are truncated.  Ids run row-major from
    1.  Zone mode takes window membership from a co-registered integer
    raster; ids are the sorted distinct zone values.
    """

    def __init__(self, mode, nrows, ncols, k=None, zones=None):
        self.mode = mode
        self.nrows = nrows
        self.ncols = ncols
        self.k = k
        self.zones = zones
        if mode == "block":
            self.lattice_rows = -(-nrows // k)
            self.lattice_cols = -(-ncols // k)

    @classmethod
    def from_spec(cls, grid, window):
        """Build a window grid from a user-facing spec.

        window may be None or "whole" (single window over everything),
        a positive int (block size in cells), or a CategoricalGrid of
        zone ids co-registered with the raster.
        """
        if window is None or window == "whole":
            return cls("block", grid.nrows, grid.ncols,
                       k=max(grid.nrows, grid.ncols))
        if isinstance(window, (int, np.integer)):
            if window <= 0:
                raise UsageError(f"window size must be positive, got {window}")
            return cls("block", grid.nrows, grid.ncols, k=int(window))
        if isinstance(window, CategoricalGrid):
            if (window.nrows, window.ncols) != (grid.nrows, grid.ncols):
                raise UsageError(
                    f"zone raster is {window.nrows}x{window.ncols}, "
                    f"landscape is {grid.nrows}x{grid.ncols}")
            return cls("zones", grid.nrows, grid.ncols, zones=window)
        raise UsageError(f"bad window spec {window!r}")

    @property
    def count(self) -> int:
        if self.mode == "block":
            return self.lattice_rows * self.lattice_cols
        return len(self.zones.classes)

    def ids(self) -> list:
        if self.mode == "block":
            return list(range(1, self.count + 1))
        return self.zones.classes

    def block_extent(self, wid: int) -> tuple:
        """Half-open (r0, r1, c0, c1) bounds of block window wid."""
        if self.mode != "block":
            raise UsageError("window ids map to extents only in block mode")
        if not 1 <= wid <= self.count:
            raise UsageError(f"window id {wid} outside 1..{self.count}")
        bi, bj = divmod(wid - 1, self.lattice_cols)
        r0, c0 = bi * self.k, bj * self.k
        return r0, min(r0 + self.k, self.nrows), c0, min(c0 + self.k, self.ncols)

    def values_to_grid(self, values: dict, grid) -> NumericGrid:
        """Per-window values painted as a raster.

        Block windows form a coarse lattice (cellsize k*r, top-left
        aligned with the source).  Zone windows have no lattice, so the
        values are painted at source resolution over each zone.
        """
        if self.mode == "block":
            arr = np.full((self.lattice_rows, self.lattice_cols), np.nan)
            for wid, val in values.items():
                bi, bj = divmod(wid - 1, self.lattice_cols)
                arr[bi, bj] = val
            cell = self.k * grid.cellsize
            top = grid.yll + grid.nrows * grid.cellsize
            return NumericGrid(arr, grid.xll, top - self.lattice_rows * cell,
                               cell, grid.nodata_code)
        arr = np.full((self.nrows, self.ncols), np.nan)
        zdata = self.zones.data
        for zid, val in values.items():
            arr[zdata == zid] = val
        return NumericGrid(arr, grid.xll, grid.yll, grid.cellsize,
                           grid.nodata_code)


def _check_coregistered(grids):
    first = grids[0]
    for g in grids[1:]:
        same = (g.nrows, g.ncols) == (first.nrows, first.ncols) and \
            (g.xll, g.yll, g.cellsize) == (first.xll, first.yll, first.cellsize)
        if not same:
            raise UsageError("input rasters are not co-registered")


def _index_array(grid: CategoricalGrid, basis) -> np.ndarray:
    """Cell classes as positions in basis; -1 where missing."""
    lookup = {c: i for i, c in enumerate(basis)}
    extra = set(grid.classes) - set(basis)
    if extra:
        raise UsageError(
            f"classes {sorted(extra)} missing from the class basis {list(basis)}")
    idx = np.full(grid.data.shape, -1, dtype=np.int64)
    for c, i in lookup.items():
        idx[grid.data == c] = i
    return idx


def _pair_matrix(idx: np.ndarray, n: int, weights: np.ndarray = None) -> np.ndarray:
    """Accumulate unordered rook adjacencies into an n x n matrix.

    Each right/down neighbor pair with both cells known adds 1 (or the
    mean of the two cells' weights) at the scan orientation's (a, b).
    The unordered count for {i, j} is M[i, j] + M[j, i] off-diagonal
    and M[i, i] on it.
    """
    M = np.zeros((n, n))
    pairs = (((idx[:, :-1], idx[:, 1:]),
              (None if weights is None else (weights[:, :-1], weights[:, 1:]))),
             ((idx[:-1, :], idx[1:, :]),
              (None if weights is None else (weights[:-1, :], weights[1:, :]))))
    for (a, b), w in pairs:
        ok = (a >= 0) & (b >= 0)
        if weights is None:
            np.add.at(M, (a[ok], b[ok]), 1.0)
        else:
            wa, wb = w
            np.add.at(M, (a[ok], b[ok]), (wa[ok] + wb[ok]) / 2.0)
    return M


def _lower_triangle(M: np.ndarray) -> np.ndarray:
    """Row-major lower triangle (diagonal included) of the folded matrix."""
    folded = M + M.T
    np.fill_diagonal(folded, np.diag(M))
    n = M.shape[0]
    ii, jj = np.tril_indices(n)
    return folded[ii, jj]


def signature_length(kind: str, n_classes: int) -> int:
    if kind == "composition":
        return n_classes
    return (n_classes * n_classes - n_classes) // 2 + n_classes


def _normalize(vec: np.ndarray) -> np.ndarray:
    total = vec.sum()
    return vec / total if total > 0 else np.zeros_like(vec)


def _window_signature(idx: np.ndarray, n: int, kind: str,
                      weights: np.ndarray = None) -> np.ndarray:
    if kind == "composition":
        counts = np.bincount(idx[idx >= 0], minlength=n).astype(np.float64)
        return _normalize(counts)
    M = _pair_matrix(idx, n, weights if kind == "wecove" else None)
    return _normalize(_lower_triangle(M))


def _combined_index(grids, bases) -> np.ndarray:
    """Index into the cross-product basis; -1 where any layer is missing."""
    idx = _index_array(grids[0], bases[0])
    for g, basis in zip(grids[1:], bases[1:]):
        nxt = _index_array(g, basis)
        both = (idx >= 0) & (nxt >= 0)
        idx = np.where(both, idx * len(basis) + nxt, -1)
    return idx


def windowed_signatures(grids, kind: str, window=None, weights=None,
                        class_basis=None, threads: int = 1) -> list:
    """Signatures of every analysis window.

    grids is one CategoricalGrid, or a list of co-registered grids for
    incove.  weights (NumericGrid or array) is required for wecove;
    missing weights count as zero.  class_basis pins the class order
    when comparing rasters whose class sets differ; by default it is
    the sorted classes of each input.
    """
    if kind not in SIGNATURE_KINDS:
        raise UsageError(
            f"unknown signature kind {kind!r}; choose from "
            f"{', '.join(SIGNATURE_KINDS)}")
    glist = list(grids) if isinstance(grids, (list, tuple)) else [grids]
    if kind == "incove":
        if len(glist) < 2:
            raise UsageError("incove needs at least two co-registered rasters")
    elif len(glist) != 1:
        raise UsageError(f"{kind} takes exactly one raster")
    _check_coregistered(glist)
    base = glist[0]

    if kind == "incove":
        bases = [g.classes for g in glist]
        if class_basis is not None:
            if len(class_basis) != len(glist):
                raise UsageError("incove class_basis needs one class list per raster")
            bases = [list(b) for b in class_basis]
        basis_labels = tuple(itertools.product(*bases))
        idx = _combined_index(glist, bases)
        n = int(np.prod([len(b) for b in bases]))
    else:
        basis = list(class_basis) if class_basis is not None else base.classes
        basis_labels = tuple(basis)
        idx = _index_array(base, basis)
        n = len(basis)

    warr = None
    if kind == "wecove":
        if weights is None:
            raise UsageError("wecove needs a co-registered weight raster")
        if isinstance(weights, NumericGrid):
            _check_coregistered([base, weights])
            warr = weights.data
        else:
            warr = np.asarray(weights, dtype=np.float64)
            if warr.shape != base.data.shape:
                raise UsageError("weight array shape does not match the raster")
        warr = np.nan_to_num(warr, nan=0.0)
    elif weights is not None:
        raise UsageError(f"weights only apply to wecove, not {kind}")

    wg = WindowGrid.from_spec(base, window)

    def one_block(wid):
        r0, r1, c0, c1 = wg.block_extent(wid)
        sub = idx[r0:r1, c0:c1]
        wsub = None if warr is None else warr[r0:r1, c0:c1]
        na = float(np.count_nonzero(sub < 0)) / sub.size
        return Signature(wid, na, _window_signature(sub, n, kind, wsub),
                         kind, basis_labels)

    def one_zone(zid):
        inzone = wg.zones.data == zid
        rr, cc = np.nonzero(inzone)
        r0, r1 = rr.min(), rr.max() + 1
        c0, c1 = cc.min(), cc.max() + 1
        box = inzone[r0:r1, c0:c1]
        sub = np.where(box, idx[r0:r1, c0:c1], -1)
        wsub = None if warr is None else np.where(box, warr[r0:r1, c0:c1], 0.0)
        na = float(np.count_nonzero(sub[box] < 0)) / np.count_nonzero(box)
        return Signature(int(zid), na, _window_signature(sub, n, kind, wsub),
                         kind, basis_labels)

    worker = one_block if wg.mode == "block" else one_zone
    ids = wg.ids()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, ids))
    return [worker(wid) for wid in ids]


def _basis_label(label) -> str:
    if isinstance(label, tuple):
        return ":".join(str(int(c)) for c in label)
    return str(int(label))


def write_signature_csv(signatures, path: str) -> None:
    """Signatures as CSV: a comment line naming kind and basis, then
    one row per window: id,na_prop,v1..vL."""
    signatures = list(signatures)
    if not signatures:
        raise UsageError("no signatures to write")
    first = signatures[0]
    L = len(first.vector)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("# kind=%s classes=%s\n" % (
                first.kind, ",".join(_basis_label(c) for c in first.class_basis)))
            f.write("id,na_prop," + ",".join(f"v{i+1}" for i in range(L)) + "\n")
            for sig in signatures:
                vals = ",".join(num_token(float(v)) for v in sig.vector)
                f.write(f"{sig.id},{num_token(float(sig.na_prop))},{vals}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def read_signature_csv(path: str) -> list:
    """Read signatures written by write_signature_csv."""
    kind, basis = "unknown", ()
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    with f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if lines and lines[0].startswith("#"):
        comment = lines.pop(0)[1:].strip()
        for part in comment.split():
            key, _, value = part.partition("=")
            if key == "kind":
                kind = value
            elif key == "classes" and value:
                labels = []
                for tok in value.split(","):
                    if ":" in tok:
                        labels.append(tuple(int(c) for c in tok.split(":")))
                    else:
                        labels.append(int(tok))
                basis = tuple(labels)
    if not lines:
        raise ParseError(f"{path}: no signature header row")
    header = lines.pop(0).split(",")
    if header[:2] != ["id", "na_prop"]:
        raise ParseError(f"{path}: expected header id,na_prop,v1..")
    L = len(header) - 2
    out = []
    for lineno, line in enumerate(lines, start=1):
        parts = line.split(",")
        if len(parts) != L + 2:
            raise ParseError(f"{path}: row with {len(parts)} fields, expected {L + 2}")
        try:
            out.append(Signature(int(parts[0]), float(parts[1]),
                                 np.array([float(v) for v in parts[2:]]),
                                 kind, basis))
        except ValueError:
            raise ParseError(f"{path}: non-numeric signature row {lineno}") from None
    return out
