"""Landscape pattern metrics and spatial signature analysis for
categorical rasters."""

from .analysis import (ClusterResult, ComparisonResult, SearchResult,
                       compare_rasters, distance, extract_window,
                       hierarchical_cluster, search_pattern)
from .errors import (IoError, LandpatError, ParseError, RenderError,
                     UsageError)
from .grid import (CategoricalGrid, LandscapeCheck, NumericGrid, PointSet,
                   check_landscape, load_ascii_grid, load_numeric_grid,
                   load_points_csv, render_ppm, write_ascii_grid)
from .metrics import (MetricDescriptor, MetricRecord, compute_class_metrics,
                      compute_landscape_metrics, compute_patch_metrics,
                      correlation_matrix, list_metrics, resolve_metric_names,
                      write_metrics_csv)
from .patches import (QUEEN, ROOK, AdjacencyMatrix, PatchLabeling, centroids,
                      circumscribing_circles, get_adjacencies, get_boundaries,
                      get_unique_values, label_patches,
                      nearest_neighbor_distances)
from .sampling import (extract_at_points, moving_window, sample_buffers,
                       spatialize_patch_metric)
from .signatures import (Signature, WindowGrid, read_signature_csv,
                         windowed_signatures, write_signature_csv)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix", "CategoricalGrid", "ClusterResult", "ComparisonResult",
    "IoError", "LandpatError", "LandscapeCheck", "MetricDescriptor",
    "MetricRecord", "NumericGrid", "ParseError", "PatchLabeling", "PointSet",
    "QUEEN", "ROOK", "RenderError", "SearchResult", "Signature", "UsageError",
    "WindowGrid", "centroids", "check_landscape", "circumscribing_circles",
    "compare_rasters", "compute_class_metrics", "compute_landscape_metrics",
    "compute_patch_metrics", "correlation_matrix", "distance",
    "extract_at_points", "extract_window", "get_adjacencies",
    "get_boundaries", "get_unique_values", "hierarchical_cluster",
    "label_patches", "list_metrics", "load_ascii_grid", "load_numeric_grid",
    "load_points_csv", "moving_window", "nearest_neighbor_distances",
    "read_signature_csv", "render_ppm", "resolve_metric_names",
    "sample_buffers", "search_pattern", "spatialize_patch_metric",
    "windowed_signatures", "write_ascii_grid", "write_metrics_csv",
    "write_signature_csv",
]
