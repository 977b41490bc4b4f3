"""Categorical raster grids: ASCII I/O, geometry, sanity checks, rendering.

A grid is a rectangular block of square cells in a projected plane.
Row 0 is the northmost row, so the y coordinate of a cell grows as the
row index shrinks.  Class codes are non-negative integers; one sentinel
code marks missing cells.  Grids are immutable once constructed and can
be shared freely between operations.
"""

import csv
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._util import num_token
from .errors import IoError, ParseError, RenderError

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")

#: class codes above this many distinct values trigger a check warning
DEFAULT_MAX_CLASSES = 30


@dataclass
class CategoricalGrid:
    """Integer-coded raster with square cells.

    data holds one class code per cell, shaped (nrows, ncols); cells
    equal to nodata_code are missing.  xll/yll locate the lower-left
    corner of the lower-left cell in map units (meters).
    """

    data: np.ndarray
    xll: float = 0.0
    yll: float = 0.0
    cellsize: float = 1.0
    nodata_code: int = -9999
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("grid data must be a non-empty 2-D array")
        if not np.issubdtype(data.dtype, np.integer):
            raise ValueError("categorical grid cells must be integers")
        data = data.astype(np.int64, copy=True)
        if self.cellsize <= 0:
            raise ValueError("cellsize must be positive")
        known = data[data != self.nodata_code]
        if known.size and known.min() < 0:
            raise ValueError("class codes must be non-negative integers")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def nrows(self) -> int:
        return self.data.shape[0]

    @property
    def ncols(self) -> int:
        return self.data.shape[1]

    @property
    def ncells(self) -> int:
        return self.data.size

    @property
    def mask(self) -> np.ndarray:
        """Boolean array, True where the cell is missing."""
        return self.data == self.nodata_code

    @property
    def classes(self) -> list:
        """Sorted distinct class codes, missing excluded."""
        vals = np.unique(self.data[self.data != self.nodata_code])
        return [int(v) for v in vals]

    @property
    def na_prop(self) -> float:
        return float(np.count_nonzero(self.mask)) / self.ncells

    def cell_center(self, row: int, col: int):
        """Map coordinates of the center of cell (row, col)."""
        x = self.xll + (col + 0.5) * self.cellsize
        y = self.yll + (self.nrows - 1 - row + 0.5) * self.cellsize
        return x, y

    def cell_at(self, x: float, y: float):
        """(row, col) of the cell containing the point, or None if outside.

        A point exactly on the east or north boundary is outside; the
        west and south boundaries are inclusive, matching half-open
        cell extents.
        """
        col = int(np.floor((x - self.xll) / self.cellsize))
        row_from_bottom = int(np.floor((y - self.yll) / self.cellsize))
        row = self.nrows - 1 - row_from_bottom
        if 0 <= row < self.nrows and 0 <= col < self.ncols:
            return row, col
        return None

    def subgrid(self, r0: int, r1: int, c0: int, c1: int) -> "CategoricalGrid":
        """Rows [r0, r1) x cols [c0, c1) as a new grid with shifted origin."""
        if not (0 <= r0 < r1 <= self.nrows and 0 <= c0 < c1 <= self.ncols):
            raise ValueError("subgrid bounds outside raster")
        xll = self.xll + c0 * self.cellsize
        yll = self.yll + (self.nrows - r1) * self.cellsize
        return CategoricalGrid(self.data[r0:r1, c0:c1], xll, yll,
                               self.cellsize, self.nodata_code, dict(self.meta))


@dataclass
class NumericGrid:
    """Float-valued raster sharing the categorical grid's geometry.

    Used for derived surfaces (spatialized metrics, moving-window
    output, dissimilarity maps).  Missing cells are NaN.
    """

    data: np.ndarray
    xll: float = 0.0
    yll: float = 0.0
    cellsize: float = 1.0
    nodata_code: float = -9999.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("grid data must be a non-empty 2-D array")
        if self.cellsize <= 0:
            raise ValueError("cellsize must be positive")
        object.__setattr__(self, "data", data)

    nrows = property(lambda self: self.data.shape[0])
    ncols = property(lambda self: self.data.shape[1])

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.data)


@dataclass
class LandscapeCheck:
    """Result of the pre-analysis sanity check on a grid."""

    crs_kind: str
    units: str
    class_value_kind: str
    n_classes: int
    ok: bool
    problems: tuple = ()


@dataclass
class PointSet:
    """Sampling locations with stable integer ids."""

    ids: list
    xs: np.ndarray
    ys: np.ndarray

    def __len__(self):
        return len(self.ids)


def _parse_header(lines):
    """Pull the six required header fields off the top of an ASCII grid."""
    fields = {}
    consumed = 0
    for lineno, raw in enumerate(lines, start=1):
        if len(fields) == len(HEADER_KEYS):
            break
        parts = raw.split()
        if not parts:
            consumed = lineno
            continue
        key = parts[0].lower()
        if key not in HEADER_KEYS:
            raise ParseError(f"line {lineno}: expected header key, got {parts[0]!r}")
        if key in fields:
            raise ParseError(f"line {lineno}: duplicate header key {parts[0]!r}")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: header line needs exactly one value")
        try:
            fields[key] = float(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: bad numeric value {parts[1]!r}") from None
        consumed = lineno
    missing = [k for k in HEADER_KEYS if k not in fields]
    if missing:
        raise ParseError(f"header incomplete, missing: {', '.join(missing)}")
    for key in ("ncols", "nrows"):
        if fields[key] != int(fields[key]) or fields[key] <= 0:
            raise ParseError(f"header {key} must be a positive integer")
    if fields["cellsize"] <= 0:
        raise ParseError("header cellsize must be positive")
    return fields, consumed


def _read_meta_sidecar(path: str) -> dict:
    meta = {}
    side = path + ".meta"
    if not os.path.exists(side):
        return meta
    with open(side, encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{side}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    return meta


def _load_values(path: str):
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    lines = text.splitlines()
    fields, consumed = _parse_header(lines)
    nrows, ncols = int(fields["nrows"]), int(fields["ncols"])
    body = "\n".join(lines[consumed:])
    try:
        values = np.array(body.split(), dtype=np.float64)
    except ValueError:
        raise ParseError(f"{path}: non-numeric cell value in data block") from None
    if values.size != nrows * ncols:
        raise ParseError(
            f"{path}: expected {nrows * ncols} cell values "
            f"({nrows}x{ncols}), found {values.size}")
    return fields, values.reshape(nrows, ncols)


def load_ascii_grid(path: str) -> CategoricalGrid:
    """Read a categorical raster from an ESRI ASCII grid file.

    Header keys are case-insensitive; cells follow as whitespace
    separated integers, row 0 (northmost) first.  A sidecar file
    "<path>.meta" with key=value lines supplies crs_kind and units
    when present.
    """
    fields, values = _load_values(path)
    if not np.all(values == np.floor(values)):
        raise ParseError(f"{path}: non-integer cell value in data block")
    data = values.astype(np.int64)
    try:
        return CategoricalGrid(
            data, fields["xllcorner"], fields["yllcorner"], fields["cellsize"],
            int(fields["nodata_value"]), _read_meta_sidecar(path))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_numeric_grid(path: str) -> NumericGrid:
    """Read a float raster (same layout); nodata cells become NaN."""
    fields, values = _load_values(path)
    nodata = fields["nodata_value"]
    data = values.copy()
    data[data == nodata] = np.nan
    return NumericGrid(data, fields["xllcorner"], fields["yllcorner"],
                       fields["cellsize"], nodata, _read_meta_sidecar(path))


def write_ascii_grid(grid, path: str) -> None:
    """Write a CategoricalGrid or NumericGrid as an ESRI ASCII file.

    Integer grids round-trip exactly.  Float grids are written with 10
    significant digits; NaN becomes the nodata value.  A non-empty meta
    dict is written to the "<path>.meta" sidecar.
    """
    numeric = isinstance(grid, NumericGrid)
    header = (
        f"NCOLS {grid.ncols}\n"
        f"NROWS {grid.nrows}\n"
        f"XLLCORNER {num_token(float(grid.xll))}\n"
        f"YLLCORNER {num_token(float(grid.yll))}\n"
        f"CELLSIZE {num_token(float(grid.cellsize))}\n"
        f"NODATA_VALUE {num_token(float(grid.nodata_code))}\n")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(header)
            if numeric:
                filled = np.where(np.isnan(grid.data), grid.nodata_code, grid.data)
                for row in filled:
                    f.write(" ".join("%.10g" % v for v in row))
                    f.write("\n")
            else:
                for row in grid.data:
                    f.write(" ".join(map(str, row)))
                    f.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    if grid.meta:
        try:
            with open(path + ".meta", "w", encoding="utf-8", newline="\n") as f:
                for key in sorted(grid.meta):
                    f.write(f"{key}={grid.meta[key]}\n")
        except OSError as exc:
            raise IoError(f"cannot write {path}.meta: {exc}") from None


def check_landscape(grid: CategoricalGrid,
                    max_classes: int = DEFAULT_MAX_CLASSES) -> LandscapeCheck:
    """Screen a grid for properties the metrics assume.

    ok requires a projected CRS, meter units, integer class codes and
    at most max_classes distinct classes.  Failures warn rather than
    raise: the caller decides whether the numbers still mean anything.
    """
    crs_kind = grid.meta.get("crs_kind", "unknown")
    units = grid.meta.get("units", "unknown")
    n_classes = len(grid.classes)
    problems = []
    if crs_kind != "projected":
        problems.append(f"crs_kind is {crs_kind!r}, expected 'projected'")
    if units != "m":
        problems.append(f"units are {units!r}, expected 'm'")
    if n_classes > max_classes:
        problems.append(f"{n_classes} classes exceed the limit of {max_classes}")
    ok = not problems
    for msg in problems:
        warnings.warn(msg, stacklevel=2)
    return LandscapeCheck(crs_kind, units, "integer", n_classes, ok, tuple(problems))


#: default class colors; unlisted classes cycle through CYCLE_COLORS
DEFAULT_PALETTE = {
    1: "#C86058",
    2: "#FCE569",
    3: "#44A321",
    4: "#A3A6FF",
    5: "#00CFFD",
}
NODATA_COLOR = "#666666"
CYCLE_COLORS = ("#1B9E77", "#D95F02", "#7570B3", "#E7298A",
                "#66A61E", "#E6AB02", "#A6761D", "#666666")


def parse_color(spec) -> tuple:
    """'#RRGGBB' or an (r, g, b) triple -> (r, g, b) ints."""
    if isinstance(spec, (tuple, list)) and len(spec) == 3:
        return tuple(int(c) for c in spec)
    s = str(spec).strip().lstrip("#")
    if len(s) != 6:
        raise RenderError(f"bad color {spec!r}, expected #RRGGBB")
    try:
        return tuple(int(s[i:i + 2], 16) for i in (0, 2, 4))
    except ValueError:
        raise RenderError(f"bad color {spec!r}, expected #RRGGBB") from None


def render_ppm(grid: CategoricalGrid, path: str, palette: dict = None,
               nodata_color=NODATA_COLOR, allow_defaults: bool = True) -> None:
    """Render one pixel per cell as a binary PPM (P6) image.

    palette maps class codes to colors.  Classes without an entry take
    colors from a fixed cycle unless allow_defaults is False, in which
    case an unmapped class raises RenderError.
    """
    colors = {} if palette is None else {int(k): parse_color(v)
                                         for k, v in palette.items()}
    cycle = iter(CYCLE_COLORS * ((len(grid.classes) // len(CYCLE_COLORS)) + 1))
    for code in grid.classes:
        if code not in colors:
            if palette is None and code in DEFAULT_PALETTE:
                colors[code] = parse_color(DEFAULT_PALETTE[code])
            elif allow_defaults:
                colors[code] = parse_color(next(cycle))
            else:
                raise RenderError(f"no palette entry for class {code}")
    lut_size = max([grid.nodata_code] + grid.classes) + 2
    lut = np.zeros((lut_size, 3), dtype=np.uint8)
    lut[:] = parse_color(nodata_color)
    for code, rgb in colors.items():
        if 0 <= code < lut_size:
            lut[code] = rgb
    idx = np.where(grid.mask, lut_size - 1, grid.data)
    pixels = lut[idx]
    try:
        with open(path, "wb") as f:
            f.write(b"P6\n%d %d\n255\n" % (grid.ncols, grid.nrows))
            f.write(pixels.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def load_points_csv(path: str) -> PointSet:
    """Read sampling points from a CSV with header id,x,y."""
    try:
        f = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty points file") from None
        if [h.strip().lower() for h in header] != ["id", "x", "y"]:
            raise ParseError(f"{path}: expected header id,x,y")
        ids, xs, ys = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(f"{path} line {lineno}: expected 3 fields")
            try:
                ids.append(int(row[0]))
                xs.append(float(row[1]))
                ys.append(float(row[2]))
            except ValueError:
                raise ParseError(
                    f"{path} line {lineno}: non-numeric point row") from None
    if len(set(ids)) != len(ids):
        raise ParseError(f"{path}: duplicate point ids")
    return PointSet(ids, np.asarray(xs), np.asarray(ys))
