"""Batch command-line interface.

One subcommand per operation; every output is written deterministically
so repeated runs (and runs with different --threads) are byte
identical.  Exit codes: 0 success, 1 broken input data, 2 usage error.
"""

import argparse
import csv
import os
import sys
import warnings

import numpy as np

from . import analysis, metrics, sampling, signatures
from .errors import IoError, ParseError, RenderError, UsageError
from .grid import (DEFAULT_MAX_CLASSES, check_landscape, load_ascii_grid,
                   load_numeric_grid, load_points_csv, render_ppm,
                   write_ascii_grid)

_LEVEL_RANK = {"patch": 0, "class": 1, "landscape": 2}


def _parse_window(spec: str):
    if spec is None or spec == "whole":
        return "whole"
    if spec.isdigit():
        return int(spec)
    return load_ascii_grid(spec)


def _split_names(what: str) -> list:
    return [w for w in (part.strip() for part in what.split(",")) if w]


def _descriptors(args) -> list:
    if args.what:
        return metrics.resolve_metric_names(_split_names(args.what))
    level = getattr(args, "level", None)
    mtype = getattr(args, "type", None)
    return metrics.list_metrics(level, mtype)


def _sort_records(records) -> list:
    return sorted(records, key=lambda r: (
        _LEVEL_RANK[r.level],
        -1 if r.class_code is None else r.class_code,
        -1 if r.patch_id is None else r.patch_id,
        r.metric))


def cmd_check(args) -> int:
    grid = load_ascii_grid(args.raster)
    report = check_landscape(grid, args.max_classes)
    print("layer crs units class_values n_classes ok")
    print(f"1 {report.crs_kind} {report.units} {report.class_value_kind} "
          f"{report.n_classes} {'v' if report.ok else 'x'}")
    return 0


def cmd_metrics(args) -> int:
    grid = load_ascii_grid(args.raster)
    chosen = _descriptors(args)
    if not chosen:
        raise UsageError("no metrics match the given filters")
    by_level = {}
    for d in chosen:
        by_level.setdefault(d.level, []).append(d.metric)
    records = []
    if "patch" in by_level:
        records += metrics.compute_patch_metrics(grid, args.directions,
                                                 by_level["patch"])
    if "class" in by_level:
        records += metrics.compute_class_metrics(grid, args.directions,
                                                 by_level["class"])
    if "landscape" in by_level:
        records += metrics.compute_landscape_metrics(grid, args.directions,
                                                     by_level["landscape"])
    metrics.write_metrics_csv(_sort_records(records), args.out)
    return 0


def cmd_extract(args) -> int:
    grid = load_ascii_grid(args.raster)
    points = load_points_csv(args.points)
    chosen = metrics.resolve_metric_names(_split_names(args.what)) \
        if args.what else metrics.list_metrics("patch")
    bad = [d.function_name for d in chosen if d.level != "patch"]
    if bad:
        raise UsageError(f"extract works on patch metrics; not {', '.join(bad)}")
    rows = sampling.extract_at_points(grid, points,
                                      [d.metric for d in chosen],
                                      args.directions)
    sampling.write_extract_csv(rows, args.out)
    return 0


def cmd_sample(args) -> int:
    grid = load_ascii_grid(args.raster)
    points = load_points_csv(args.points)
    chosen = metrics.resolve_metric_names(_split_names(args.what)) \
        if args.what else (metrics.list_metrics("class")
                           + metrics.list_metrics("landscape"))
    bad = [d.function_name for d in chosen if d.level == "patch"]
    if bad:
        raise UsageError(
            f"sample works on class/landscape metrics; not {', '.join(bad)}")
    class_which = [d.metric for d in chosen if d.level == "class"]
    land_which = [d.metric for d in chosen if d.level == "landscape"]
    rows = sampling.sample_buffers(grid, points, args.size, args.shape,
                                   class_which, land_which, args.directions)
    if args.min_inside > 0:
        rows = [row for row in rows if row[1] >= args.min_inside]
    sampling.write_sample_csv(rows, args.out)
    return 0


def cmd_spatialize(args) -> int:
    grid = load_ascii_grid(args.raster)
    chosen = metrics.resolve_metric_names(_split_names(args.what)) \
        if args.what else metrics.list_metrics("patch")
    bad = [d.function_name for d in chosen if d.level != "patch"]
    if bad:
        raise UsageError(f"spatialize works on patch metrics; not {', '.join(bad)}")
    out = sampling.spatialize_patch_metric(grid, args.directions,
                                           [d.metric for d in chosen])
    os.makedirs(args.out_dir, exist_ok=True)
    for metric_name in sorted(out):
        write_ascii_grid(out[metric_name],
                         os.path.join(args.out_dir, f"{metric_name}.asc"))
    return 0


def _parse_mask(spec: str) -> np.ndarray:
    if "x" in spec and spec.replace("x", "").isdigit():
        rows, _, cols = spec.partition("x")
        return np.ones((int(rows), int(cols)), dtype=np.int64)
    return load_ascii_grid(spec).data


def cmd_window(args) -> int:
    grid = load_ascii_grid(args.raster)
    chosen = metrics.resolve_metric_names(_split_names(args.what))
    if len(chosen) != 1 or chosen[0].level != "landscape":
        raise UsageError("window takes exactly one landscape metric")
    mask = _parse_mask(args.mask)
    result = sampling.moving_window(grid, mask, chosen[0].metric,
                                    args.directions)
    write_ascii_grid(result, args.out)
    return 0


def cmd_signature(args) -> int:
    grids = [load_ascii_grid(p) for p in args.rasters]
    weights = load_numeric_grid(args.weights) if args.weights else None
    sigs = signatures.windowed_signatures(
        grids if len(grids) > 1 else grids[0], args.type,
        _parse_window(args.window), weights, threads=args.threads)
    signatures.write_signature_csv(sigs, args.out)
    return 0


def cmd_compare(args) -> int:
    x = load_ascii_grid(args.raster_x)
    y = load_ascii_grid(args.raster_y)
    result = analysis.compare_rasters(x, y, args.type, args.dist,
                                      _parse_window(args.window),
                                      threads=args.threads)
    analysis.write_compare_csv(result, args.out_prefix + ".csv")
    for name in ("na_prop_x", "na_prop_y", "dist"):
        write_ascii_grid(result.grids[name], f"{args.out_prefix}_{name}.asc")
    return 0


def cmd_search(args) -> int:
    query = load_ascii_grid(args.query)
    target = load_ascii_grid(args.target)
    result = analysis.search_pattern(query, target, args.type, args.dist,
                                     _parse_window(args.window),
                                     threads=args.threads)
    analysis.write_search_csv(result, args.out_prefix + ".csv")
    for name in ("id", "na_prop", "dist"):
        write_ascii_grid(result.grids[name], f"{args.out_prefix}_{name}.asc")
    return 0


def cmd_extract_window(args) -> int:
    grid = load_ascii_grid(args.raster)
    sub = analysis.extract_window(grid, _parse_window(args.window), args.id)
    write_ascii_grid(sub, args.out)
    return 0


def cmd_cluster(args) -> int:
    sigs = signatures.read_signature_csv(args.signatures)
    result = analysis.hierarchical_cluster(sigs, args.dist, args.linkage, args.k)
    analysis.write_cluster_csv(result, args.out)
    if args.tree:
        analysis.write_merge_tree_csv(result, args.tree)
    return 0


def _load_palette(path: str) -> dict:
    palette = {}
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["class", "color"]:
            raise ParseError(f"{path}: expected header class,color")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path} line {lineno}: expected class,color")
            key = row[0].strip().lower()
            palette["nodata" if key == "nodata" else int(key)] = row[1].strip()
    return palette


def cmd_render(args) -> int:
    grid = load_ascii_grid(args.raster)
    palette = _load_palette(args.palette) if args.palette else None
    nodata_color = "#666666"
    if palette and "nodata" in palette:
        nodata_color = palette.pop("nodata")
    render_ppm(grid, args.out, palette, nodata_color,
               allow_defaults=not args.no_default_colors)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landpat",
        description="Landscape pattern metrics and spatial signature "
                    "analysis for categorical rasters.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    def directions_arg(p):
        p.add_argument("--directions", type=int, choices=(4, 8), default=8,
                       help="patch connectivity: 4 (rook) or 8 (queen)")

    def threads_arg(p):
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; results are identical for any value")

    p = add("check", cmd_check, "screen a raster before analysis")
    p.add_argument("raster")
    p.add_argument("--max-classes", type=int, default=DEFAULT_MAX_CLASSES,
                   help="class count above which the check warns")

    p = add("metrics", cmd_metrics, "patch/class/landscape metrics as tidy CSV")
    p.add_argument("raster")
    p.add_argument("--what", help="comma list of lsm_<p|c|l>_<metric> names")
    p.add_argument("--level", choices=("patch", "class", "landscape"))
    p.add_argument("--type", help="registry type filter, e.g. 'area and edge'")
    directions_arg(p)
    p.add_argument("--out", required=True)

    p = add("extract", cmd_extract, "patch metrics under sample points")
    p.add_argument("raster")
    p.add_argument("--points", required=True, help="CSV with header id,x,y")
    p.add_argument("--what", help="comma list of lsm_p_* names")
    directions_arg(p)
    p.add_argument("--out", required=True)

    p = add("sample", cmd_sample, "class/landscape metrics in buffers")
    p.add_argument("raster")
    p.add_argument("--points", required=True, help="CSV with header id,x,y")
    p.add_argument("--shape", choices=("circle", "square"), default="circle")
    p.add_argument("--size", type=float, required=True,
                   help="circle radius or square half-side, map units")
    p.add_argument("--what", help="comma list of lsm_c_*/lsm_l_* names")
    p.add_argument("--min-inside", type=float, default=0.0,
                   help="drop plots with percentage_inside below this")
    directions_arg(p)
    p.add_argument("--out", required=True)

    p = add("spatialize", cmd_spatialize, "patch metrics painted onto rasters")
    p.add_argument("raster")
    p.add_argument("--what", help="comma list of lsm_p_* names")
    directions_arg(p)
    p.add_argument("--out-dir", required=True)

    p = add("window", cmd_window, "moving-window landscape metric")
    p.add_argument("raster")
    p.add_argument("--mask", required=True,
                   help="RxC for an all-ones window, or a 0/1 ASCII grid")
    p.add_argument("--what", required=True, help="one lsm_l_* name")
    directions_arg(p)
    p.add_argument("--out", required=True)

    p = add("signature", cmd_signature, "windowed spatial signatures")
    p.add_argument("rasters", nargs="+")
    p.add_argument("--type", choices=signatures.SIGNATURE_KINDS, default="cove")
    p.add_argument("--window", help="'whole', block size, or a zone raster path")
    p.add_argument("--weights", help="weight raster for wecove")
    threads_arg(p)
    p.add_argument("--out", required=True)

    p = add("compare", cmd_compare, "window dissimilarity of two rasters")
    p.add_argument("raster_x")
    p.add_argument("raster_y")
    p.add_argument("--type", choices=("composition", "cove", "wecove"),
                   default="cove")
    p.add_argument("--dist", choices=analysis.DISTANCE_KINDS,
                   default="jensen-shannon")
    p.add_argument("--window", help="'whole', block size, or a zone raster path")
    threads_arg(p)
    p.add_argument("--out-prefix", required=True)

    p = add("search", cmd_search, "scan a raster for a query pattern")
    p.add_argument("query")
    p.add_argument("target")
    p.add_argument("--type", choices=("composition", "cove", "wecove"),
                   default="cove")
    p.add_argument("--dist", choices=analysis.DISTANCE_KINDS,
                   default="jensen-shannon")
    p.add_argument("--window", help="'whole', block size, or a zone raster path")
    threads_arg(p)
    p.add_argument("--out-prefix", required=True)

    p = add("extract-window", cmd_extract_window, "cut one window out as a grid")
    p.add_argument("raster")
    p.add_argument("--window", required=True, help="block size in cells")
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add("cluster", cmd_cluster, "hierarchical clustering of signatures")
    p.add_argument("signatures", help="CSV from the signature subcommand")
    p.add_argument("--dist", choices=analysis.DISTANCE_KINDS,
                   default="jensen-shannon")
    p.add_argument("--linkage", choices=analysis.LINKAGES, default="complete")
    p.add_argument("--k", type=int, required=True, help="number of clusters")
    p.add_argument("--out", required=True)
    p.add_argument("--tree", help="also write the merge tree CSV here")

    p = add("render", cmd_render, "render a raster as a PPM image")
    p.add_argument("raster")
    p.add_argument("--palette", help="CSV with header class,color")
    p.add_argument("--no-default-colors", action="store_true",
                   help="fail on classes missing from the palette")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = args.func(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return code
    except (ParseError, IoError, RenderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
