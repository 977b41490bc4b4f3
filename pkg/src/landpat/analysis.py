"""Comparing and mining patterns via signature dissimilarity.

The workhorse distance is the Jensen-Shannon divergence (natural log,
the divergence itself, not its square root), bounded by ln 2.  Windows
whose signature is all zeros carry no pattern, so any distance against
them is reported missing rather than zero.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._util import num_token
from .errors import IoError, UsageError
from .grid import CategoricalGrid, NumericGrid
from .signatures import Signature, WindowGrid, windowed_signatures

DISTANCE_KINDS = ("euclidean", "manhattan", "jensen-shannon")
LINKAGES = ("complete", "average", "single")


def _entropy(v: np.ndarray) -> float:
    nz = v[v > 0]
    return float(-np.sum(nz * np.log(nz)))


def distance(p, q, kind: str = "jensen-shannon") -> float:
    """Dissimilarity between two signature vectors.

    jensen-shannon expects probability vectors and returns NaN when
    either sums to zero; euclidean and manhattan accept any vectors of
    equal length.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise UsageError(f"vector lengths differ: {p.size} vs {q.size}")
    if kind == "euclidean":
        return float(np.sqrt(np.sum((p - q) ** 2)))
    if kind == "manhattan":
        return float(np.sum(np.abs(p - q)))
    if kind == "jensen-shannon":
        if p.sum() == 0 or q.sum() == 0:
            return float("nan")
        m = (p + q) / 2.0
        return max(0.0, _entropy(m) - (_entropy(p) + _entropy(q)) / 2.0)
    raise UsageError(
        f"unknown distance {kind!r}; choose from {', '.join(DISTANCE_KINDS)}")


def _pair_distance(a: Signature, b: Signature, kind: str) -> float:
    # zero signatures mean "nothing to compare", not "identical"
    if a.vector.sum() == 0 or b.vector.sum() == 0:
        return float("nan")
    return distance(a.vector, b.vector, kind)


@dataclass
class ComparisonResult:
    """Window-by-window dissimilarity between two co-registered rasters."""

    ids: list
    na_prop_x: list
    na_prop_y: list
    dist: list
    grids: dict = field(default_factory=dict)

    def rows(self):
        return zip(self.ids, self.na_prop_x, self.na_prop_y, self.dist)


@dataclass
class SearchResult:
    """Dissimilarity of each target window to a query raster's signature."""

    ids: list
    na_prop: list
    dist: list
    grids: dict = field(default_factory=dict)

    def rows(self):
        return zip(self.ids, self.na_prop, self.dist)


def _shared_basis(*grids) -> list:
    out = set()
    for g in grids:
        out.update(g.classes)
    return sorted(out)


def compare_rasters(x: CategoricalGrid, y: CategoricalGrid,
                    kind: str = "cove", dist: str = "jensen-shannon",
                    window=None, weights_x=None, weights_y=None,
                    threads: int = 1) -> ComparisonResult:
    """Compare two co-registered rasters window by window.

    Signatures are built on the union of both class sets so the vectors
    align even when one raster lacks a class.  Output grids (na_prop_x,
    na_prop_y, dist) live on the window lattice.
    """
    if kind == "incove":
        raise UsageError("compare takes one raster per side; incove does not apply")
    if (x.nrows, x.ncols) != (y.nrows, y.ncols) or \
            (x.xll, x.yll, x.cellsize) != (y.xll, y.yll, y.cellsize):
        raise UsageError("rasters to compare must be co-registered")
    basis = _shared_basis(x, y)
    sx = windowed_signatures(x, kind, window, weights_x, basis, threads)
    sy = windowed_signatures(y, kind, window, weights_y, basis, threads)
    dists = [_pair_distance(a, b, dist) for a, b in zip(sx, sy)]
    ids = [s.id for s in sx]
    wg = WindowGrid.from_spec(x, window)
    grids = {
        "na_prop_x": wg.values_to_grid({s.id: s.na_prop for s in sx}, x),
        "na_prop_y": wg.values_to_grid({s.id: s.na_prop for s in sy}, x),
        "dist": wg.values_to_grid(dict(zip(ids, dists)), x),
    }
    return ComparisonResult(ids, [s.na_prop for s in sx],
                            [s.na_prop for s in sy], dists, grids)


def search_pattern(query: CategoricalGrid, target: CategoricalGrid,
                   kind: str = "cove", dist: str = "jensen-shannon",
                   window=None, query_weights=None, target_weights=None,
                   threads: int = 1) -> SearchResult:
    """Score every target window against the query raster's signature.

    The query contributes one whole-raster signature; rasters need not
    be co-registered, only measured on the shared class basis.
    """
    if kind == "incove":
        raise UsageError("search takes one raster per side; incove does not apply")
    basis = _shared_basis(query, target)
    qsig = windowed_signatures(query, kind, "whole", query_weights, basis)[0]
    if qsig.vector.sum() == 0:
        raise UsageError("query raster produces an empty signature")
    tsigs = windowed_signatures(target, kind, window, target_weights, basis,
                                threads)
    dists = [_pair_distance(qsig, t, dist) for t in tsigs]
    ids = [t.id for t in tsigs]
    wg = WindowGrid.from_spec(target, window)
    grids = {
        "id": wg.values_to_grid({i: float(i) for i in ids}, target),
        "na_prop": wg.values_to_grid({t.id: t.na_prop for t in tsigs}, target),
        "dist": wg.values_to_grid(dict(zip(ids, dists)), target),
    }
    return SearchResult(ids, [t.na_prop for t in tsigs], dists, grids)


def extract_window(grid: CategoricalGrid, window, wid: int) -> CategoricalGrid:
    """Cut one block window out as a standalone grid.

    The result keeps cell size and shifts the origin so the window
    stays georeferenced.  Only block (or whole) windows have ids that
    map to extents.
    """
    wg = WindowGrid.from_spec(grid, window)
    r0, r1, c0, c1 = wg.block_extent(wid)
    return grid.subgrid(r0, r1, c0, c1)


@dataclass
class ClusterResult:
    """Agglomerative clustering of signatures.

    labels[i] is the cluster (1..k) of ids[i]; clusters are numbered by
    first appearance in input order.  merges records the full tree as
    (step, left, right, height) with leaves 1..m and the cluster formed
    at step s numbered m+s.  dropped lists ids excluded for having
    all-zero signatures.
    """

    ids: list
    labels: list
    k: int
    linkage: str
    merges: list
    dropped: list = field(default_factory=list)


def hierarchical_cluster(signatures, dist: str = "jensen-shannon",
                         linkage: str = "complete", k: int = 2) -> ClusterResult:
    """Cluster signatures by pairwise dissimilarity.

    Classic agglomerative scheme on the full distance matrix: merge the
    closest pair, update distances per the linkage rule, repeat.  The
    tree is built to the root; labels come from cutting it at k
    clusters.
    """
    if linkage not in LINKAGES:
        raise UsageError(
            f"unknown linkage {linkage!r}; choose from {', '.join(LINKAGES)}")
    sigs = list(signatures)
    dropped = [s.id for s in sigs if s.vector.sum() == 0]
    if dropped:
        warnings.warn(
            f"dropping {len(dropped)} all-zero signature(s): "
            f"{', '.join(map(str, dropped))}", stacklevel=2)
        sigs = [s for s in sigs if s.vector.sum() != 0]
    m = len(sigs)
    if m < 2:
        raise UsageError(f"need at least 2 non-empty signatures, have {m}")
    if not 1 <= k <= m:
        raise UsageError(f"k must be between 1 and {m}, got {k}")
    ids = [s.id for s in sigs]

    D = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            D[i, j] = D[j, i] = distance(sigs[i].vector, sigs[j].vector, dist)
    if np.isnan(D).any():
        raise UsageError("signature distances contain missing values")
    work = D.copy()
    np.fill_diagonal(work, np.inf)
    work[np.tril_indices(m)] = np.inf

    sizes = np.ones(m)
    node = np.arange(1, m + 1)             # current tree node id per slot
    members = {i: [i] for i in range(m)}   # leaf indices per active slot
    active = np.ones(m, dtype=bool)
    merges = []
    partition = None
    if k == m:
        partition = {i: [i] for i in range(m)}
    for step in range(1, m):
        flat = np.argmin(work)
        i, j = divmod(int(flat), m)
        height = float(work[i, j])
        merges.append((step, int(node[i]), int(node[j]), height))
        # fold cluster j into slot i, Lance-Williams update of row i
        for other in np.nonzero(active)[0]:
            if other == i or other == j:
                continue
            a, b = work[min(i, other), max(i, other)], \
                work[min(j, other), max(j, other)]
            if linkage == "single":
                d = min(a, b)
            elif linkage == "complete":
                d = max(a, b)
            else:
                d = (sizes[i] * a + sizes[j] * b) / (sizes[i] + sizes[j])
            work[min(i, other), max(i, other)] = d
        active[j] = False
        work[j, :] = np.inf
        work[:, j] = np.inf
        sizes[i] += sizes[j]
        members[i] = members[i] + members.pop(j)
        node[i] = m + step
        if int(active.sum()) == k:
            partition = {s: list(members[s]) for s in members}
    # number clusters by first appearance in input order
    leaf_cluster = {}
    for slot, leaves in partition.items():
        for leaf in leaves:
            leaf_cluster[leaf] = slot
    label_of_slot, next_label = {}, 1
    labels = []
    for leaf in range(m):
        slot = leaf_cluster[leaf]
        if slot not in label_of_slot:
            label_of_slot[slot] = next_label
            next_label += 1
        labels.append(label_of_slot[slot])
    return ClusterResult(ids, labels, k, linkage, merges, dropped)


def write_compare_csv(result: ComparisonResult, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("id,na_prop_x,na_prop_y,dist\n")
            for wid, nx, ny, d in result.rows():
                f.write(f"{wid},{num_token(float(nx))},{num_token(float(ny))},"
                        f"{num_token(float(d))}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def write_search_csv(result: SearchResult, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("id,na_prop,dist\n")
            for wid, na, d in result.rows():
                f.write(f"{wid},{num_token(float(na))},{num_token(float(d))}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def write_cluster_csv(result: ClusterResult, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("id,cluster\n")
            for wid, label in zip(result.ids, result.labels):
                f.write(f"{wid},{label}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def write_merge_tree_csv(result: ClusterResult, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("step,left,right,height\n")
            for step, left, right, height in result.merges:
                f.write(f"{step},{left},{right},{num_token(float(height))}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
