"""Patch, class and landscape metrics over categorical grids.

Areas are hectares, perimeters meters, matching the usual reporting
units for 100 m class rasters.  Every computation returns tidy
MetricRecord rows ordered by (class, patch id, metric name) so CSV
output is reproducible byte for byte.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._util import num_token
from .errors import IoError, UsageError
from .grid import CategoricalGrid
from .patches import QUEEN, get_boundaries, label_all

PATCH_METRICS = ("area", "cai", "frac", "perim", "shape")
CLASS_METRICS = ("area_cv", "area_mn", "area_sd", "ca", "np", "pland")
LANDSCAPE_METRICS = ("lpi", "np", "pr", "shdi", "ta")

CSV_HEADER = "layer,level,class,id,metric,value"


@dataclass(frozen=True)
class MetricRecord:
    """One metric value in the tidy result table.

    class_code and patch_id are None where the level does not apply
    (class metrics have no patch id, landscape metrics have neither).
    """

    layer: int
    level: str
    class_code: Optional[int]
    patch_id: Optional[int]
    metric: str
    value: float

    def csv_row(self) -> str:
        return ",".join([
            str(self.layer), self.level, num_token(self.class_code),
            num_token(self.patch_id), self.metric, num_token(float(self.value)),
        ])


@dataclass(frozen=True)
class MetricDescriptor:
    metric: str
    level: str
    type: str
    function_name: str


REGISTRY = (
    MetricDescriptor("area", "patch", "area and edge", "lsm_p_area"),
    MetricDescriptor("cai", "patch", "core area", "lsm_p_cai"),
    MetricDescriptor("frac", "patch", "shape", "lsm_p_frac"),
    MetricDescriptor("perim", "patch", "area and edge", "lsm_p_perim"),
    MetricDescriptor("shape", "patch", "shape", "lsm_p_shape"),
    MetricDescriptor("area_cv", "class", "area and edge", "lsm_c_area_cv"),
    MetricDescriptor("area_mn", "class", "area and edge", "lsm_c_area_mn"),
    MetricDescriptor("area_sd", "class", "area and edge", "lsm_c_area_sd"),
    MetricDescriptor("ca", "class", "area and edge", "lsm_c_ca"),
    MetricDescriptor("np", "class", "aggregation", "lsm_c_np"),
    MetricDescriptor("pland", "class", "area and edge", "lsm_c_pland"),
    MetricDescriptor("lpi", "landscape", "area and edge", "lsm_l_lpi"),
    MetricDescriptor("np", "landscape", "aggregation", "lsm_l_np"),
    MetricDescriptor("pr", "landscape", "diversity", "lsm_l_pr"),
    MetricDescriptor("shdi", "landscape", "diversity", "lsm_l_shdi"),
    MetricDescriptor("ta", "landscape", "area and edge", "lsm_l_ta"),
)

_LEVEL_ABBREV = {"p": "patch", "c": "class", "l": "landscape"}


def list_metrics(level: str = None, type: str = None) -> list:
    """Registry entries matching the given filters, sorted by name."""
    rows = [d for d in REGISTRY
            if (level is None or d.level == level)
            and (type is None or d.type == type)]
    return sorted(rows, key=lambda d: (d.metric, d.level))


def resolve_metric_names(names) -> list:
    """Map "lsm_<p|c|l>_<metric>" names onto registry descriptors.

    Order is preserved and duplicates dropped; an unknown name raises
    UsageError listing the valid choices.
    """
    by_fn = {d.function_name: d for d in REGISTRY}
    out, seen = [], set()
    for name in names:
        d = by_fn.get(name.strip())
        if d is None:
            valid = ", ".join(sorted(by_fn))
            raise UsageError(f"unknown metric {name!r}; valid names: {valid}")
        if d.function_name not in seen:
            seen.add(d.function_name)
            out.append(d)
    return out


def _check_which(which, allowed, level):
    if which is None:
        return list(allowed)
    bad = sorted(set(which) - set(allowed))
    if bad:
        raise UsageError(
            f"unknown {level} metric(s): {', '.join(bad)}; "
            f"choose from {', '.join(allowed)}")
    return [m for m in allowed if m in set(which)]


def _min_perimeter_sides(n: np.ndarray) -> np.ndarray:
    """Perimeter, in cell sides, of the most compact arrangement of n cells."""
    m = np.floor(np.sqrt(n))
    return np.where(m * m == n, 4 * m,
                    np.where(n <= m * (m + 1), 4 * m + 2, 4 * m + 4))


def _patch_geometry(grid, labeling):
    """Vectorized per-patch cell counts, perimeters (m) and core counts."""
    r = grid.cellsize
    n_patches = labeling.n_patches
    labels = labeling.labels
    shared = np.zeros(n_patches + 1, dtype=np.int64)
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        same = (a == b) & (a > 0)
        shared += np.bincount(a[same], minlength=n_patches + 1)
    cells = labeling.cell_counts
    perim = (4 * cells - 2 * shared[1:]) * r
    edges = get_boundaries(labeling, grid)
    core_mask = edges.data == 0
    core = np.bincount(labels[core_mask], minlength=n_patches + 1)[1:]
    return cells, perim.astype(np.float64), core


def _patch_values(grid, labeling):
    """metric -> array over patch ids for one class labeling."""
    r = grid.cellsize
    cells, perim, core = _patch_geometry(grid, labeling)
    area_ha = cells * r * r / 10000.0
    shape = perim / (_min_perimeter_sides(cells) * r)
    area_m2 = cells * r * r
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = 2.0 * np.log(0.25 * perim) / np.log(area_m2)
    frac = np.where(cells == 1, 1.0, frac)
    cai = 100.0 * core / cells
    return {"area": area_ha, "perim": perim, "shape": shape,
            "frac": frac, "cai": cai}


def compute_patch_metrics(grid: CategoricalGrid, directions: int = QUEEN,
                          which=None, layer: int = 1) -> list:
    """Per-patch metric rows for every class, ordered by
    (class, patch id, metric name)."""
    which = _check_which(which, PATCH_METRICS, "patch")
    records = []
    for class_code, labeling in label_all(grid, directions).items():
        values = _patch_values(grid, labeling)
        for pid in labeling.patch_ids():
            for metric in which:
                records.append(MetricRecord(
                    layer, "patch", class_code, pid, metric,
                    float(values[metric][pid - 1])))
    return records


def compute_class_metrics(grid: CategoricalGrid, directions: int = QUEEN,
                          which=None, layer: int = 1) -> list:
    """Per-class metric rows ordered by (class, metric name)."""
    which = _check_which(which, CLASS_METRICS, "class")
    r = grid.cellsize
    known = int(np.count_nonzero(~grid.mask))
    records = []
    for class_code, labeling in label_all(grid, directions).items():
        areas = labeling.cell_counts * r * r / 10000.0
        mn = float(np.mean(areas))
        sd = float(np.std(areas, ddof=1)) if len(areas) > 1 else float("nan")
        values = {
            "np": float(labeling.n_patches),
            "area_mn": mn,
            "area_sd": sd,
            "area_cv": 100.0 * sd / mn,
            "ca": float(np.sum(areas)),
            "pland": 100.0 * float(labeling.cell_counts.sum()) / known,
        }
        for metric in which:
            records.append(MetricRecord(
                layer, "class", class_code, None, metric, values[metric]))
    return records


def compute_landscape_metrics(grid: CategoricalGrid, directions: int = QUEEN,
                              which=None, layer: int = 1) -> list:
    """Whole-landscape metric rows ordered by metric name."""
    which = _check_which(which, LANDSCAPE_METRICS, "landscape")
    r = grid.cellsize
    labelings = label_all(grid, directions)
    known = int(np.count_nonzero(~grid.mask))
    ta = known * r * r / 10000.0
    class_cells = {c: lab.cell_counts.sum() for c, lab in labelings.items()}
    largest = max((lab.cell_counts.max() for lab in labelings.values()
                   if lab.n_patches), default=0)
    props = np.array([cnt / known for cnt in class_cells.values()])
    shdi = float(-np.sum(props * np.log(props))) if props.size else 0.0
    values = {
        "ta": ta,
        "lpi": 100.0 * largest * r * r / 10000.0 / ta if ta else float("nan"),
        "pr": float(len(labelings)),
        "shdi": shdi,
        "np": float(sum(lab.n_patches for lab in labelings.values())),
    }
    return [MetricRecord(layer, "landscape", None, None, m, values[m])
            for m in which]


def write_metrics_csv(records, path: str) -> None:
    """Tidy CSV with header layer,level,class,id,metric,value."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(CSV_HEADER + "\n")
            for rec in records:
                f.write(rec.csv_row() + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


@dataclass
class CorrelationMatrix:
    """Pairwise Pearson correlations between metrics at one level."""

    metrics: list
    values: np.ndarray


def correlation_matrix(records) -> CorrelationMatrix:
    """Correlate metrics across analysis units (patches or classes).

    Requires records from a single level with every unit carrying every
    metric, and at least 3 units.  Constant metrics produce NaN
    off-diagonal entries; the diagonal is 1 by definition.
    """
    records = list(records)
    if not records:
        raise UsageError("no records to correlate")
    levels = {rec.level for rec in records}
    if len(levels) > 1:
        raise UsageError(f"records mix levels: {', '.join(sorted(levels))}")
    level = levels.pop()
    if level == "patch":
        unit_of = lambda rec: (rec.class_code, rec.patch_id)
    elif level == "class":
        unit_of = lambda rec: rec.class_code
    else:
        raise UsageError("landscape level has a single unit; nothing to correlate")
    table = {}
    for rec in records:
        key = (unit_of(rec), rec.metric)
        if key in table:
            raise UsageError(f"duplicate value for unit {key[0]}, metric {rec.metric}")
        table[key] = rec.value
    units = sorted({u for u, _ in table})
    metrics = sorted({m for _, m in table})
    if len(units) < 3:
        raise UsageError(f"need at least 3 units to correlate, have {len(units)}")
    X = np.empty((len(units), len(metrics)))
    for i, u in enumerate(units):
        for j, m in enumerate(metrics):
            if (u, m) not in table:
                raise UsageError(f"unit {u} is missing metric {m!r}")
            X[i, j] = table[(u, m)]
    Xc = X - X.mean(axis=0)
    ss = np.sqrt((Xc ** 2).sum(axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        R = (Xc.T @ Xc) / np.outer(ss, ss)
    np.fill_diagonal(R, 1.0)
    return CorrelationMatrix(metrics, R)
